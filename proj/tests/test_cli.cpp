// SPDX-License-Identifier: Apache-2.0

#include "test_util.h"

#include "commands.h"

#include <skinfit/color.h>
#include <skinfit/texture_set.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace skinfit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "skinfit");
    std::vector<const char *> argv;
    for (const std::string &a : args) argv.push_back(a.c_str());
    testing::internal::CaptureStdout();
    testing::internal::CaptureStderr();
    CliRun r;
    r.code = cli::run_cli(int(argv.size()), argv.data());
    r.out = testing::internal::GetCapturedStdout();
    r.err = testing::internal::GetCapturedStderr();
    return r;
}

fs::path write_config(const test::TempDir &dir, const std::string &name, const json &j) {
    const fs::path p = dir / name;
    test::write_text(p, j.dump());
    return p;
}

json tiny_synth(std::uint64_t seed) {
    return {{"subdivisions", 8}, {"texture_resolution", 16}, {"views", 5},
            {"width", 32},       {"height", 32},             {"fx", 100},
            {"sigma", 0.002},    {"seed", seed}};
}

json read_json(const fs::path &p) { return json::parse(test::read_bytes(p)); }

TEST(Cli, UsageErrorsAreConfigErrors) {
    EXPECT_EQ(run({}).code, cli::kExitConfig);
    EXPECT_EQ(run({"paint"}).code, cli::kExitConfig);
    EXPECT_EQ(run({"synth", "--workers", "-2"}).code, cli::kExitConfig);
    EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, UnknownConfigKeyIsNamed) {
    test::TempDir dir("cli");
    json j = tiny_synth(1);
    j["colour"] = "blue";
    const CliRun r = run({"synth", "--config", write_config(dir, "c.json", j).string(), "--out",
                          (dir / "ds").string()});
    EXPECT_EQ(r.code, cli::kExitConfig);
    EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST(Cli, MissingInputsAreDataErrors) {
    test::TempDir dir("cli");
    const fs::path cfg = write_config(dir, "fit.json", {{"manifest", "nowhere/manifest.json"}});
    EXPECT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir / "o").string()}).code,
              cli::kExitData);
    const fs::path bad = write_config(dir, "fit2.json", json::object());
    EXPECT_EQ(run({"fit", "--config", bad.string()}).code, cli::kExitConfig);
}

TEST(Cli, SynthIsDeterministic) {
    test::TempDir dir("cli");
    const fs::path cfg = write_config(dir, "s.json", tiny_synth(7));
    ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "b").string(), "--workers",
                   "3"})
                  .code,
              0);
    ASSERT_EQ(run({"synth", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed",
                   "8"})
                  .code,
              0);
    std::size_t files = 0;
    for (const auto &e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir / "a");
        EXPECT_EQ(test::read_bytes(e.path()), test::read_bytes(dir / "b" / rel)) << rel;
        ++files;
    }
    EXPECT_GT(files, 10u);
    EXPECT_NE(test::read_bytes(dir / "a" / "images" / "cross_000.pfm"),
              test::read_bytes(dir / "c" / "images" / "cross_000.pfm"));
}

TEST(Cli, FitStagesRenderAndEval) {
    test::TempDir dir("cli");
    ASSERT_EQ(run({"synth", "--config", write_config(dir, "s.json", tiny_synth(3)).string(),
                   "--out", (dir / "ds").string()})
                  .code,
              0);
    const json fit = {{"manifest", "ds/manifest.json"}, {"levels", {16}}, {"iterations", 3},
                      {"stage2_iterations", 3}};
    const fs::path fit_cfg = write_config(dir, "fit.json", fit);

    CliRun r = run({"fit", "--config", fit_cfg.string(), "--stage", "1", "--out",
                    (dir / "s1").string(), "--workers", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const TextureSet s1 = TextureSet::load(dir / "s1" / "textures");
    for (double v : s1.ks.data()) EXPECT_EQ(v, 0.0);
    const json m1 = read_json(dir / "s1" / "metrics.json");
    EXPECT_TRUE(m1["holdout"]["mean_psnr"].is_number());
    EXPECT_TRUE(m1["textures"]["kd_psnr"].is_number());
    EXPECT_TRUE(fs::exists(dir / "s1" / "loss.csv"));
    EXPECT_TRUE(fs::exists(dir / "s1" / "timing.json"));

    json fit2 = fit;
    fit2["stage1_textures"] = "s1/textures";
    r = run({"fit", "--config", write_config(dir, "fit2.json", fit2).string(), "--stage", "2",
             "--out", (dir / "s2").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const TextureSet s2 = TextureSet::load(dir / "s2" / "textures");
    for (std::size_t k = 0; k < s1.kd.data().size(); ++k) EXPECT_EQ(s2.kd[k], s1.kd[k]);

    EXPECT_EQ(run({"fit", "--config", fit_cfg.string(), "--stage", "3", "--out",
                   (dir / "x").string()})
                  .code,
              cli::kExitConfig);
    EXPECT_EQ(run({"fit", "--config", fit_cfg.string(), "--stage", "2", "--out",
                   (dir / "x").string()})
                  .code,
              cli::kExitConfig);

    const json render = {{"manifest", "ds/manifest.json"},
                         {"textures", "s2/textures"},
                         {"views", {"cross_000"}},
                         {"mode", "both"},
                         {"format", "pfm"}};
    r = run({"render", "--config", write_config(dir, "r.json", render).string(), "--out",
             (dir / "r").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "r" / "cross_000_cross.pfm"));
    EXPECT_TRUE(fs::exists(dir / "r" / "cross_000_parallel.pfm"));
    EXPECT_FALSE(fs::exists(dir / "r" / "cross_000_cross.png"));

    json render_bad = render;
    render_bad["views"] = {"cross_404"};
    EXPECT_EQ(run({"render", "--config", write_config(dir, "rb.json", render_bad).string(),
                   "--out", (dir / "r").string()})
                  .code,
              cli::kExitData);

    const json eval = {{"manifest", "ds/manifest.json"}, {"textures", "ds/ground_truth"}};
    r = run({"eval", "--config", write_config(dir, "e.json", eval).string(), "--out",
             (dir / "e").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json me = read_json(dir / "e" / "metrics.json");
    EXPECT_GT(me["holdout"]["mean_psnr"].get<double>(), 40.0);
    EXPECT_EQ(me["textures"]["kd_psnr"].get<double>(), 99.0);
}

TEST(Cli, GradcheckExitCodes) {
    test::TempDir dir("cli");
    const json ok = {{"samples_per_map", 5}, {"views", 1}};
    CliRun r = run({"gradcheck", "--config", write_config(dir, "g.json", ok).string(), "--out",
                    (dir / "g").string()});
    EXPECT_EQ(r.code, cli::kExitOk) << r.out;
    EXPECT_EQ(read_json(dir / "g" / "gradcheck.json")["pass"], true);

    json bad = ok;
    bad["corrupt_ks"] = 1.5;
    r = run({"gradcheck", "--config", write_config(dir, "b.json", bad).string()});
    EXPECT_EQ(r.code, cli::kExitNumerical);
    EXPECT_EQ(json::parse(r.out)["pass"], false);
}

TEST(Cli, CalibrateColor) {
    test::TempDir dir("cli");
    std::vector<Vec3d> measured, reference;
    for (int i = 0; i < 8; ++i) {
        const Vec3d m{0.1 + 0.1 * i, 0.2 + 0.09 * ((i * 5) % 8), 0.2 + 0.08 * ((i * 3) % 8)};
        measured.push_back(m);
        reference.push_back(m * 1.5 + Vec3d{0.01, 0, -0.01});
    }
    write_patches(dir / "m.txt", measured);
    write_patches(dir / "r.txt", reference);
    const json cfg = {{"measured", "m.txt"}, {"reference", "r.txt"}, {"out", "cc"}};
    ASSERT_EQ(run({"calibrate-color", "--config", write_config(dir, "c.json", cfg).string()}).code,
              0);
    const ColorAffine a = load_color_affine(dir / "cc" / "color_affine.json");
    EXPECT_NEAR(a.A(1, 1), 1.5, 1e-9);
    EXPECT_NEAR(a.b.x, 0.01, 1e-9);

    write_patches(dir / "short.txt", std::vector<Vec3d>(measured.begin(), measured.begin() + 3));
    const json short_cfg = {{"measured", "short.txt"}, {"reference", "short.txt"}, {"out", "cc"}};
    EXPECT_EQ(
        run({"calibrate-color", "--config", write_config(dir, "s.json", short_cfg).string()}).code,
        cli::kExitData);
}

TEST(Cli, CalibrateLight) {
    test::TempDir dir("cli");
    const json synth = {{"shape", "plane"}, {"subdivisions", 16}, {"texture_resolution", 16},
                        {"views", 4},       {"width", 32},        {"height", 32},
                        {"fx", 300},        {"sigma", 0},         {"vignette", true},
                        {"seed", 2}};
    ASSERT_EQ(run({"synth", "--config", write_config(dir, "s.json", synth).string(), "--out",
                   (dir / "plane").string()})
                  .code,
              0);
    const json cal = {{"manifest", "plane/manifest.json"},
                      {"levels", {16}},
                      {"iterations", 5},
                      {"out", "cal"}};
    const CliRun r = run({"calibrate-light", "--config", write_config(dir, "c.json", cal).string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json rep = read_json(dir / "cal" / "calibration.json");
    EXPECT_NEAR(rep["center_mean"].get<double>(), 1.0, 1e-5);
    EXPECT_TRUE(rep["mae_vs_reference"].is_number());
    EXPECT_TRUE(fs::exists(dir / "cal" / "attenuation.pfm"));
}

}  // namespace
}  // namespace skinfit
