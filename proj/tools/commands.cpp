// SPDX-License-Identifier: Apache-2.0

#include "commands.h"

#include "run_config.h"

#include <skinfit/color.h>
#include <skinfit/dataset.h>
#include <skinfit/error.h>
#include <skinfit/log.h>
#include <skinfit/pipeline.h>
#include <skinfit/synth.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace skinfit::cli {

namespace {

struct GlobalOptions {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string stage = "both";
    std::optional<fs::path> out;
    bool verbose = false;
};

int worker_count(const GlobalOptions &g) {
    if (g.workers > 0) return g.workers;
    return int(std::max(1u, std::thread::hardware_concurrency()));
}

std::uint64_t seed_of(const GlobalOptions &g, const RunConfig &cfg) {
    return g.seed ? *g.seed : cfg.get<std::uint64_t>("seed", 0);
}

fs::path output_dir(const GlobalOptions &g, const RunConfig &cfg) {
    fs::path out;
    if (g.out) out = *g.out;
    else if (auto p = cfg.path("out")) out = *p;
    else throw ConfigError("an output directory is required (--out or config key 'out')");
    fs::create_directories(out);
    return out;
}

fs::path existing_input(const RunConfig &cfg, const std::string &key) {
    const fs::path p = cfg.required_path(key);
    if (!fs::exists(p)) throw DataError("input '" + key + "' not found: " + p.string());
    return p;
}

void write_json(const fs::path &path, const json &j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + path.string());
}

std::array<double, 3> triple(const RunConfig &cfg, const std::string &key,
                             std::array<double, 3> fallback) {
    return cfg.get<std::array<double, 3>>(key, fallback);
}

WeightScheme parse_weighting(const std::string &s) {
    if (s == "mip_cosine") return WeightScheme::MipCosine;
    if (s == "cosine") return WeightScheme::Cosine;
    if (s == "unit") return WeightScheme::Unit;
    throw ConfigError("unknown weighting '" + s + "' (mip_cosine | cosine | unit)");
}

ScheduleConfig read_schedule(const RunConfig &cfg, const std::string &iterations_key) {
    ScheduleConfig s;
    s.levels = cfg.get<std::vector<int>>("levels", s.levels);
    s.iterations = cfg.get<int>(iterations_key, cfg.get<int>("iterations", s.iterations));
    s.batch_size = cfg.get<int>("batch_size", s.batch_size);
    s.adam.lr0 = cfg.get<double>("lr0", s.adam.lr0);
    s.regularizer.tv = cfg.get<double>("tv_weight", s.regularizer.tv);
    s.regularizer.zero = cfg.get<double>("zero_weight", s.regularizer.zero);
    s.validate();
    return s;
}

// Manifest attenuation unless the config overrides it: a PFM path, or
// "none" for M = 1.
void apply_attenuation_override(const RunConfig &cfg, Dataset &ds) {
    if (!cfg.has("attenuation")) return;
    if (cfg.get<std::string>("attenuation", "") == "none") {
        ds.attenuation = AttenuationMap{};
        return;
    }
    const fs::path p = existing_input(cfg, "attenuation");
    ds.attenuation = read_pfm(p);
    const Camera &c = ds.views.front().camera;
    attenuation_or_ones(ds.attenuation, c.width, c.height);
}

json holdout_json(const HoldoutMetrics &h) {
    json j;
    j["mean_psnr"] = h.mean_psnr;
    j["mean_ssim"] = h.mean_ssim;
    j["views"] = json::array();
    for (const ViewMetrics &v : h.views)
        j["views"].push_back({{"id", v.id},
                              {"polarization", to_string(v.polarization)},
                              {"psnr", v.psnr},
                              {"ssim", v.ssim}});
    return j;
}

// Texture metrics against the manifest's ground truth, over texels observed
// by the train views; null when no ground truth is available.
json texture_json(const Dataset &ds, const TextureSet &recovered, int workers) {
    if (!ds.ground_truth) return nullptr;
    const TextureSet gt = TextureSet::load(*ds.ground_truth);
    const int r = recovered.resolution();
    if (gt.resolution() != r) {
        log_warning("ground truth resolution differs from the fit; skipping texture metrics");
        return nullptr;
    }
    std::vector<CaptureView> train;
    for (const CaptureView &v : ds.views)
        if (v.role == ViewRole::Train) train.push_back(v);
    const auto views = prepare_views(ds.mesh, train, ds.attenuation, workers);
    const Mask mask = observed_texels(views, r);
    const TextureMetrics m = compare_textures(recovered, gt, mask);
    return {{"kd_psnr", m.kd_psnr},
            {"ks_psnr", m.ks_psnr},
            {"normal_error_deg", m.normal_error_deg},
            {"alpha", recovered.alpha},
            {"alpha_error", m.alpha_error},
            {"diffuse_scale", recovered.diffuse_scale},
            {"diffuse_scale_error", m.diffuse_scale_error},
            {"coverage", m.coverage}};
}

// --- subcommands ----------------------------------------------------------

int cmd_synth(const GlobalOptions &g) {
    const RunConfig cfg = RunConfig::load(
        g.config, {"shape", "subdivisions", "blob_amplitude", "texture_resolution", "views",
                   "radius", "cap_deg", "jitter_deg", "fx", "width", "height", "sigma", "vignette",
                   "light_intensity", "diffuse_scale", "specular", "normal_bumps", "blob_count",
                   "render_parallel", "seed", "out"});
    SynthConfig s;
    s.shape = cfg.get<std::string>("shape", s.shape);
    s.subdivisions = cfg.get<int>("subdivisions", s.subdivisions);
    s.blob_amplitude = cfg.get<double>("blob_amplitude", s.blob_amplitude);
    s.texture_resolution = cfg.get<int>("texture_resolution", s.texture_resolution);
    s.views = cfg.get<int>("views", s.views);
    s.radius = cfg.get<double>("radius", s.radius);
    s.orbit.cap_deg = cfg.get<double>("cap_deg", s.orbit.cap_deg);
    s.jitter_deg = cfg.get<double>("jitter_deg", s.jitter_deg);
    s.orbit.fx = cfg.get<double>("fx", s.orbit.fx);
    s.orbit.width = cfg.get<int>("width", s.orbit.width);
    s.orbit.height = cfg.get<int>("height", s.orbit.height);
    s.sigma = cfg.get<double>("sigma", s.sigma);
    s.vignette = cfg.get<bool>("vignette", s.vignette);
    const auto li = triple(cfg, "light_intensity", {10, 10, 10});
    s.light_intensity = {li[0], li[1], li[2]};
    s.textures.diffuse_scale = triple(cfg, "diffuse_scale", s.textures.diffuse_scale);
    s.textures.specular = cfg.get<bool>("specular", s.textures.specular);
    s.textures.normal_bumps = cfg.get<bool>("normal_bumps", s.textures.normal_bumps);
    s.textures.blob_count = cfg.get<int>("blob_count", s.textures.blob_count);
    s.render_parallel = cfg.get<bool>("render_parallel", s.render_parallel);
    s.seed = seed_of(g, cfg);
    const fs::path out = output_dir(g, cfg);

    const SynthScene scene = make_scene(s);
    const Dataset ds = render_dataset(scene, worker_count(g));
    write_synth(out, scene, ds);
    std::cout << "wrote " << ds.views.size() << " views to " << (out / "manifest.json").string()
              << '\n';
    return kExitOk;
}

int cmd_fit(const GlobalOptions &g) {
    const RunConfig cfg = RunConfig::load(
        g.config, {"manifest", "levels", "iterations", "stage2_iterations", "batch_size", "lr0",
                   "tv_weight", "zero_weight", "weighting", "init_alpha", "attenuation",
                   "stage1_textures", "seed", "out"});
    const fs::path manifest = existing_input(cfg, "manifest");
    StageSelection stages;
    if (g.stage == "1") stages = StageSelection::First;
    else if (g.stage == "2") stages = StageSelection::Second;
    else if (g.stage == "both") stages = StageSelection::Both;
    else throw ConfigError("--stage must be 1, 2 or both");

    FitConfig fc;
    const std::uint64_t seed = seed_of(g, cfg);
    const int workers = worker_count(g);
    fc.stage1.schedule = read_schedule(cfg, "iterations");
    fc.stage2.schedule = read_schedule(cfg, "stage2_iterations");
    fc.stage1.weights = fc.stage2.weights =
        parse_weighting(cfg.get<std::string>("weighting", "mip_cosine"));
    fc.stage1.seed = seed;
    fc.stage2.seed = seed + 1;
    fc.stage1.workers = fc.stage2.workers = workers;
    fc.init_alpha = cfg.get<double>("init_alpha", fc.init_alpha);
    std::optional<TextureSet> stage1_init;
    if (stages == StageSelection::Second)
        stage1_init = TextureSet::load(existing_input(cfg, "stage1_textures"));
    const fs::path out = output_dir(g, cfg);

    Dataset ds = load_manifest(manifest);
    apply_attenuation_override(cfg, ds);
    const auto start = std::chrono::steady_clock::now();
    const FitOutputs res = fit_dataset(ds, fc, stages, stage1_init ? &*stage1_init : nullptr);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    res.textures.save(out / "textures");
    if (stages != StageSelection::Second) res.stage1.textures.save(out / "stage1");
    write_loss_csv(out / "loss.csv", res);

    json metrics;
    metrics["holdout"] = res.holdout.views.empty() ? json(nullptr) : holdout_json(res.holdout);
    metrics["textures"] = texture_json(ds, res.textures, workers);
    write_json(out / "metrics.json", metrics);

    json timing;
    timing["total_seconds"] = seconds;
    auto levels = [](const StageResult &r) {
        json a = json::array();
        for (const LevelRecord &l : r.levels)
            a.push_back({{"resolution", l.resolution}, {"seconds", l.seconds}});
        return a;
    };
    timing["stage1"] = levels(res.stage1);
    timing["stage2"] = levels(res.stage2);
    write_json(out / "timing.json", timing);

    std::cout << metrics.dump(2) << '\n';
    return kExitOk;
}

int cmd_render(const GlobalOptions &g) {
    const RunConfig cfg = RunConfig::load(
        g.config, {"manifest", "textures", "views", "mode", "format", "attenuation", "out"});
    const fs::path manifest = existing_input(cfg, "manifest");
    const fs::path tex_dir = existing_input(cfg, "textures");
    const std::string mode = cfg.get<std::string>("mode", "own");
    if (mode != "own" && mode != "cross" && mode != "parallel" && mode != "both")
        throw ConfigError("mode must be own, cross, parallel or both");
    const std::string format = cfg.get<std::string>("format", "both");
    if (format != "pfm" && format != "png" && format != "both")
        throw ConfigError("format must be pfm, png or both");
    const fs::path out = output_dir(g, cfg);

    Dataset ds = load_manifest(manifest);
    apply_attenuation_override(cfg, ds);
    const TextureSet textures = TextureSet::load(tex_dir);
    std::vector<std::size_t> which;
    if (cfg.has("views")) {
        for (const auto &id : cfg.get<std::vector<std::string>>("views", {}))
            which.push_back(ds.find(id));
    } else {
        for (std::size_t i = 0; i < ds.views.size(); ++i) which.push_back(i);
    }
    const int workers = worker_count(g);
    for (std::size_t i : which) {
        const CaptureView &v = ds.views[i];
        std::vector<Polarization> modes;
        if (mode == "own") modes = {v.polarization};
        else if (mode == "cross") modes = {Polarization::Cross};
        else if (mode == "parallel") modes = {Polarization::Parallel};
        else modes = {Polarization::Cross, Polarization::Parallel};
        const GBuffer gb = rasterize(ds.mesh, v.camera, workers);
        const AttenuationMap att = attenuation_or_ones(ds.attenuation, v.camera.width, v.camera.height);
        for (Polarization p : modes) {
            const Image img = shade(gb, textures, {v.camera.center(), ds.light_intensity}, att, p,
                                    workers);
            const std::string stem = v.id + "_" + to_string(p);
            if (format != "png") write_pfm(out / (stem + ".pfm"), img);
            if (format != "pfm") write_png(out / (stem + ".png"), img);
        }
    }
    std::cout << "rendered " << which.size() << " views to " << out.string() << '\n';
    return kExitOk;
}

int cmd_calibrate_light(const GlobalOptions &g) {
    const RunConfig cfg = RunConfig::load(
        g.config, {"manifest", "levels", "iterations", "batch_size", "lr0", "channels",
                   "center_fraction", "reference", "seed", "out"});
    const fs::path manifest = existing_input(cfg, "manifest");
    CalibrationConfig cc;
    cc.schedule.levels = {64, 128, 256};
    cc.schedule.levels = cfg.get<std::vector<int>>("levels", cc.schedule.levels);
    cc.schedule.iterations = cfg.get<int>("iterations", cc.schedule.iterations);
    cc.schedule.batch_size = cfg.get<int>("batch_size", cc.schedule.batch_size);
    cc.schedule.adam.lr0 = cfg.get<double>("lr0", cc.schedule.adam.lr0);
    cc.schedule.validate();
    cc.channels = cfg.get<int>("channels", cc.channels);
    cc.center_fraction = cfg.get<double>("center_fraction", cc.center_fraction);
    cc.workers = worker_count(g);
    cc.seed = seed_of(g, cfg);
    std::optional<fs::path> reference;
    if (cfg.has("reference")) reference = existing_input(cfg, "reference");
    const fs::path out = output_dir(g, cfg);

    const Dataset ds = load_manifest(manifest);
    if (!reference && ds.ground_truth && fs::exists(*ds.ground_truth / "attenuation.pfm"))
        reference = *ds.ground_truth / "attenuation.pfm";

    std::vector<CaptureView> views;
    for (const CaptureView &v : ds.views)
        if (v.polarization == Polarization::Cross) views.push_back(v);
    const CalibrationResult res = calibrate_attenuation(ds.mesh, views, ds.light_intensity, cc);
    write_pfm(out / "attenuation.pfm", res.attenuation);
    write_png(out / "attenuation.png", res.attenuation);

    json report;
    report["center_mean"] = center_mean(res.attenuation, cc.center_fraction);
    std::size_t observed = 0;
    for (auto n : res.observations) observed += n >= 3 ? 1 : 0;
    report["pixels_observed_3plus"] = observed;
    if (reference) {
        const Image ref = read_pfm(*reference);
        if (ref.width() != res.attenuation.width() || ref.height() != res.attenuation.height())
            throw DataError("reference attenuation map differs in size");
        double sum = 0;
        for (std::size_t p = 0; p < res.observations.size(); ++p) {
            if (res.observations[p] < 3) continue;
            for (int c = 0; c < res.attenuation.channels(); ++c)
                sum += std::abs(double(res.attenuation.channel(p, c)) - double(ref.channel(p, c)));
        }
        report["mae_vs_reference"] =
            observed ? sum / double(observed * std::size_t(res.attenuation.channels())) : 0.0;
    }
    write_json(out / "calibration.json", report);
    std::cout << report.dump(2) << '\n';
    return kExitOk;
}

int cmd_calibrate_color(const GlobalOptions &g) {
    const RunConfig cfg = RunConfig::load(g.config, {"measured", "reference", "out"});
    const fs::path measured = existing_input(cfg, "measured");
    const fs::path reference = existing_input(cfg, "reference");
    const fs::path out = output_dir(g, cfg);
    const ColorAffine a = fit_color_affine(read_patches(measured), read_patches(reference));
    save_color_affine(out / "color_affine.json", a);
    std::cout << "wrote " << (out / "color_affine.json").string() << '\n';
    return kExitOk;
}

int cmd_eval(const GlobalOptions &g) {
    const RunConfig cfg =
        RunConfig::load(g.config, {"manifest", "textures", "attenuation", "out"});
    const fs::path manifest = existing_input(cfg, "manifest");
    const fs::path tex_dir = existing_input(cfg, "textures");
    const fs::path out = output_dir(g, cfg);
    Dataset ds = load_manifest(manifest);
    apply_attenuation_override(cfg, ds);
    const TextureSet textures = TextureSet::load(tex_dir);
    const int workers = worker_count(g);
    std::vector<CaptureView> holdout;
    for (const CaptureView &v : ds.views)
        if (v.role == ViewRole::Holdout) holdout.push_back(v);
    json metrics;
    metrics["holdout"] = holdout.empty() ? json(nullptr)
                                         : holdout_json(evaluate_holdout(
                                               textures, holdout, ds.mesh, ds.attenuation,
                                               ds.light_intensity, workers));
    metrics["textures"] = texture_json(ds, textures, workers);
    write_json(out / "metrics.json", metrics);
    std::cout << metrics.dump(2) << '\n';
    return kExitOk;
}

int cmd_gradcheck(const GlobalOptions &g) {
    const RunConfig cfg = RunConfig::load(
        g.config, {"samples_per_map", "threshold", "texel_step", "scalar_step", "views",
                   "corrupt_ks", "seed", "out"});
    GradCheckOptions o;
    o.samples_per_map = cfg.get<int>("samples_per_map", o.samples_per_map);
    o.threshold = cfg.get<double>("threshold", o.threshold);
    o.texel_step = cfg.get<double>("texel_step", o.texel_step);
    o.scalar_step = cfg.get<double>("scalar_step", o.scalar_step);
    o.corrupt_ks = cfg.get<double>("corrupt_ks", o.corrupt_ks);
    o.seed = seed_of(g, cfg);
    const int views = cfg.get<int>("views", 3);
    std::optional<fs::path> out;
    if (g.out || cfg.has("out")) out = output_dir(g, cfg);

    const GradCheckScene scene = make_gradcheck_scene(o.seed, views);
    const GradCheckReport report = finite_diff_check(scene, o);
    const std::string text = report.to_json();
    std::cout << text << '\n';
    if (out) {
        std::ofstream f(*out / "gradcheck.json");
        f << text << '\n';
    }
    return report.pass ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(int argc, const char *const *argv) {
    CLI::App app{"Inverse rendering of polarized flash captures"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON settings for the subcommand");
    app.add_option("--seed", g.seed, "Seed for every random choice");
    app.add_option("--workers", g.workers, "Worker threads (default: all cores)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--stage", g.stage, "Fit stages to run: 1, 2 or both");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("-v,--verbose", g.verbose, "Log progress");

    using Handler = int (*)(const GlobalOptions &);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands{
        {"synth", "Generate and render a synthetic dataset", cmd_synth},
        {"fit", "Fit textures to a dataset (stage 1, stage 2)", cmd_fit},
        {"render", "Render views of a dataset with a texture set", cmd_render},
        {"calibrate-light", "Fit the light attenuation map from plane captures",
         cmd_calibrate_light},
        {"calibrate-color", "Fit an affine color correction from patch colors",
         cmd_calibrate_color},
        {"eval", "Score a texture set on a dataset", cmd_eval},
        {"gradcheck", "Compare analytic gradients with finite differences", cmd_gradcheck},
    };
    for (const auto &[name, help, fn] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    set_log_level(g.verbose ? LogLevel::Info : LogLevel::Warning);

    try {
        for (const auto &[name, help, fn] : commands)
            if (app.got_subcommand(name)) return fn(g);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace skinfit::cli
