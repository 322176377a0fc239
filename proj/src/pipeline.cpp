// SPDX-License-Identifier: Apache-2.0

#include <skinfit/pipeline.h>

#include <skinfit/error.h>
#include <skinfit/log.h>
#include <skinfit/parallel.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace skinfit {

std::vector<FitView> prepare_views(const TriMesh &mesh, std::span<const CaptureView> views,
                                   const AttenuationMap &attenuation, int workers) {
    std::vector<FitView> out;
    out.reserve(views.size());
    for (const CaptureView &v : views) {
        const GBuffer gb = rasterize(mesh, v.camera, workers);
        if (gb.covered_count() == 0) throw DataError("view '" + v.id + "' does not see the mesh");
        out.push_back(prepare_view(gb, v.image,
                                   attenuation_or_ones(attenuation, v.camera.width, v.camera.height),
                                   v.polarization));
    }
    return out;
}

namespace {

double scheme_weight(WeightScheme scheme, double cosv, double footprint, int resolution) {
    switch (scheme) {
    case WeightScheme::MipCosine: return pixel_weight(cosv, mip_level(footprint, resolution));
    case WeightScheme::Cosine: return cosv;
    case WeightScheme::Unit: return 1.0;
    }
    return 0;
}

void require_mode(std::span<const FitView> views, Polarization mode, const char *stage) {
    for (const FitView &v : views)
        if (v.mode != mode)
            throw DataError(std::string(stage) + " expects " + to_string(mode) +
                            "-polarized views only");
}

StageObjective make_objective(std::span<const FitView> views, const Vec3d &intensity,
                              const StageConfig &config, const ParamMask &mask) {
    return [views, intensity, &config, mask](const TextureSet &params,
                                             std::span<const std::size_t> batch, int resolution,
                                             TextureGradients &grads) {
        BackwardOptions opt;
        opt.policy = {config.weights, resolution};
        opt.mask = mask;
        opt.scale = 1.0 / double(batch.size());
        opt.workers = config.workers;
        double loss = 0;
        for (std::size_t idx : batch) loss += backward(views[idx], params, intensity, grads, opt);
        return loss / double(batch.size());
    };
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

Texture initialize_albedo(std::span<const FitView> views, const Vec3d &intensity, int resolution,
                          WeightScheme scheme) {
    Texture sum(resolution, 3), weight(resolution, 1);
    for (const FitView &view : views) {
        for (std::size_t i = 0; i < view.covered(); ++i) {
            const ShadingSample &s = view.geometry.samples[i];
            const double c = dot(Vec3d(s.normal), Vec3d(s.omega));
            if (c < 0.05) continue;
            const double w = scheme_weight(scheme, c, s.footprint, resolution);
            if (w <= 0) continue;
            brdf::ShadingInputs in;
            in.cosv = c;
            in.dist = s.dist;
            in.kd = {1, 1, 1};
            in.intensity = intensity;
            const Vec3d unit = brdf::radiance(in, Polarization::Cross);
            const Vec3d m(view.attenuation[i]);
            TexelValue obs{};
            bool ok = true;
            for (int k = 0; k < 3; ++k) {
                const double denom = unit[k] * m[k];
                if (!(denom > 0)) ok = false;
                else obs[k] = std::max(0.0, double(view.target[i][k]) / denom);
            }
            if (!ok) continue;
            const BilinearFootprint fp(resolution, s.u, s.v);
            for (int k = 0; k < 4; ++k) {
                const double bw = w * fp.weight[k];
                if (bw <= 0) continue;
                weight[fp.texel[k]] += bw;
                for (int c3 = 0; c3 < 3; ++c3) sum[3 * fp.texel[k] + c3] += bw * obs[c3];
            }
        }
    }
    double wsum = 0;
    Vec3d mean;
    for (std::size_t t = 0; t < weight.texel_count(); ++t) {
        if (weight[t] <= 0) continue;
        for (int k = 0; k < 3; ++k) mean[k] += sum[3 * t + k];
        wsum += weight[t];
    }
    if (!(wsum > 0)) throw DataError("no texel receives a weighted observation");
    mean = mean / wsum;
    Texture kd(resolution, 3);
    for (std::size_t t = 0; t < weight.texel_count(); ++t)
        for (int k = 0; k < 3; ++k)
            kd[3 * t + k] = weight[t] > 0 ? sum[3 * t + k] / weight[t] : mean[k];
    return kd;
}

Texture initialize_specular(std::span<const FitView> views, const Vec3d &intensity,
                            const TextureSet &textures, int resolution, WeightScheme scheme) {
    TextureSet base = textures;
    base.ks = Texture(resolution, 1, 0.0);
    Texture num(resolution, 1), den(resolution, 1);
    for (const FitView &view : views) {
        for (std::size_t i = 0; i < view.covered(); ++i) {
            const ShadingSample &s = view.geometry.samples[i];
            const SampleFootprints fp(base, s.u, s.v);
            brdf::BrdfDerivatives d;
            const Vec3d m(view.attenuation[i]);
            const SampleEval e =
                evaluate_sample(s, fp, base, intensity, m, Polarization::Parallel, &d);
            if (e.raw_cos < 0.05) continue;
            const double w = scheme_weight(scheme, e.inputs.cosv, s.footprint, resolution);
            if (w <= 0) continue;
            double sr = 0, ss = 0;
            for (int k = 0; k < 3; ++k) {
                const double unit = m[k] * d.d_ks[k];
                sr += unit * (double(view.target[i][k]) - e.rendered[k]);
                ss += unit * unit;
            }
            if (!(ss > 0)) continue;
            for (int k = 0; k < 4; ++k) {
                const double bw = w * fp.ks.weight[k];
                if (bw <= 0) continue;
                num[fp.ks.texel[k]] += bw * sr;
                den[fp.ks.texel[k]] += bw * ss;
            }
        }
    }
    double nsum = 0, dsum = 0;
    for (std::size_t t = 0; t < den.texel_count(); ++t) {
        nsum += num[t];
        dsum += den[t];
    }
    if (!(dsum > 0)) throw DataError("no texel receives a specular observation");
    const double mean = std::clamp(nsum / dsum, 0.0, 1.0);
    Texture ks(resolution, 1);
    for (std::size_t t = 0; t < den.texel_count(); ++t)
        ks[t] = den[t] > 0 ? std::clamp(num[t] / den[t], 0.0, 1.0) : mean;
    return ks;
}

StageResult stage1_fit(std::span<const FitView> cross_views, const Vec3d &intensity,
                       const StageConfig &config, double init_alpha) {
    config.schedule.validate();
    if (cross_views.size() < 4) throw DataError("stage 1 needs at least 4 cross-polarized views");
    require_mode(cross_views, Polarization::Cross, "stage 1");

    const auto &levels = config.schedule.levels;
    TextureSet init = TextureSet::make(levels.front());
    init.kd = initialize_albedo(cross_views, intensity, levels.front(), config.weights);
    init.ks = Texture(levels.back(), 1, 0.0);
    init.alpha = init_alpha;

    const ParamMask mask{.kd = true, .ka = true, .normal = true};
    BatchSampler sampler(all_indices(cross_views.size()), std::size_t(config.schedule.batch_size),
                         config.seed);
    auto result = coarse_to_fine(config.schedule, std::move(init), mask,
                                 make_objective(cross_views, intensity, config, mask), sampler);
    return {std::move(result.textures), std::move(result.levels)};
}

StageResult stage2_fit(std::span<const FitView> parallel_views, const Vec3d &intensity,
                       const TextureSet &stage1, const StageConfig &config) {
    config.schedule.validate();
    if (parallel_views.empty()) throw DataError("stage 2 needs parallel-polarized views");
    require_mode(parallel_views, Polarization::Parallel, "stage 2");

    const int r0 = config.schedule.levels.front();
    TextureSet init = stage1;
    init.normal = resample(stage1.normal, r0);
    init.diffuse_scale = {1, 1, 1};
    init.ks = initialize_specular(parallel_views, intensity, init, r0, config.weights);

    const ParamMask mask{.ks = true, .normal = true, .alpha = true, .diffuse_scale = true};
    BatchSampler sampler(all_indices(parallel_views.size()),
                         std::size_t(config.schedule.batch_size), config.seed);
    auto result = coarse_to_fine(config.schedule, std::move(init), mask,
                                 make_objective(parallel_views, intensity, config, mask), sampler);
    return {std::move(result.textures), std::move(result.levels)};
}

// --- attenuation calibration ---------------------------------------------

namespace {

struct CenterWindow {
    int x0, x1, y0, y1;  // half-open
};

CenterWindow center_window(int w, int h, double fraction) {
    if (!(fraction > 0 && fraction <= 1)) throw ConfigError("center fraction must be in (0, 1]");
    const double s = std::sqrt(fraction);
    const int ww = std::max(1, int(std::lround(w * s))), hh = std::max(1, int(std::lround(h * s)));
    const int x0 = (w - ww) / 2, y0 = (h - hh) / 2;
    return {x0, x0 + ww, y0, y0 + hh};
}

double window_mean(std::span<const double> m, int w, int h, int channels, double fraction) {
    const CenterWindow win = center_window(w, h, fraction);
    double sum = 0;
    std::size_t n = 0;
    for (int y = win.y0; y < win.y1; ++y)
        for (int x = win.x0; x < win.x1; ++x)
            for (int c = 0; c < channels; ++c) {
                sum += m[(std::size_t(y) * w + x) * channels + c];
                ++n;
            }
    return sum / double(n);
}

}  // namespace

double center_mean(const AttenuationMap &m, double fraction) {
    if (m.empty()) throw DataError("empty attenuation map");
    std::vector<double> d(m.data().begin(), m.data().end());
    return window_mean(d, m.width(), m.height(), m.channels(), fraction);
}

CalibrationResult calibrate_attenuation(const TriMesh &plane, std::span<const CaptureView> views,
                                        const Vec3d &intensity, const CalibrationConfig &config) {
    config.schedule.validate();
    if (config.channels != 1 && config.channels != 3)
        throw ConfigError("attenuation channels must be 1 or 3");
    if (views.empty()) throw DataError("attenuation calibration needs at least one view");
    const int width = views.front().camera.width, height = views.front().camera.height;
    for (const CaptureView &v : views) {
        if (v.camera.width != width || v.camera.height != height)
            throw DataError("calibration views differ in image size");
        if (v.polarization != Polarization::Cross)
            throw DataError("attenuation calibration expects cross-polarized views");
    }
    center_window(width, height, config.center_fraction);  // validates the fraction

    std::vector<FitView> fit = prepare_views(plane, views, AttenuationMap{}, config.workers);
    const std::size_t npix = std::size_t(width) * height;
    const int nc = config.channels;

    CalibrationResult result;
    result.observations.assign(npix, 0);
    for (std::size_t v = 0; v < fit.size(); ++v) {
        for (std::uint32_t p : fit[v].geometry.pixel) ++result.observations[p];
        const double coverage = double(fit[v].covered()) / double(npix);
        if (coverage < 0.5)
            log_warning("calibration view '" + views[v].id + "' covers only " +
                        std::to_string(int(std::lround(coverage * 100))) + "% of the image");
    }

    std::vector<double> m(npix * std::size_t(nc), 1.0);
    const auto &levels = config.schedule.levels;
    TextureSet params = TextureSet::make(levels.front());
    params.kd = initialize_albedo(fit, intensity, levels.front(), WeightScheme::Unit);

    const ParamMask mask{.kd = true};
    BatchSampler sampler(all_indices(fit.size()), std::size_t(config.schedule.batch_size),
                         config.seed);

    auto refresh = [&](FitView &view) {
        for (std::size_t i = 0; i < view.covered(); ++i) {
            const std::size_t p = view.geometry.pixel[i];
            for (int k = 0; k < 3; ++k)
                view.attenuation[i][k] = float(m[p * nc + (nc == 1 ? 0 : k)]);
        }
    };

    for (std::size_t li = 0; li < levels.size(); ++li) {
        const int r = levels[li];
        if (li > 0) params.kd = upsample2x(params.kd);
        params.ks = Texture(r, 1, 0.0);
        params.ka = Texture(r, 3, 0.0);
        params.normal = TextureSet::make(r).normal;

        const auto start = std::chrono::steady_clock::now();
        LevelRecord rec;
        rec.resolution = r;
        AdamState adam = AdamState::for_params(params, config.schedule.adam);
        AdamMoments adam_m(m.size());
        TextureGradients grads = TextureGradients::zeros_like(params);
        std::vector<double> gm(m.size());
        for (int it = 0; it < config.schedule.iterations; ++it) {
            grads.set_zero();
            std::fill(gm.begin(), gm.end(), 0.0);
            const std::vector<std::size_t> batch = sampler.next();
            const double bscale = 1.0 / double(batch.size());
            double loss = 0;
            for (std::size_t idx : batch) {
                FitView &view = fit[idx];
                refresh(view);
                BackwardOptions opt;
                opt.policy = {WeightScheme::Unit, r};
                opt.mask = mask;
                opt.scale = bscale;
                opt.workers = config.workers;
                loss += backward(view, params, intensity, grads, opt) * bscale;

                const double gscale = bscale / double(view.covered());
                // Every covered pixel of a view is distinct, so slices never
                // write the same entry.
                parallel_for(view.covered(), config.workers, [&](std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) {
                        const ShadingSample &s = view.geometry.samples[i];
                        const SampleEval ev =
                            evaluate_sample(s, SampleFootprints(params, s.u, s.v), params,
                                            intensity, {1, 1, 1}, Polarization::Cross);
                        const std::size_t p = view.geometry.pixel[i];
                        for (int k = 0; k < 3; ++k) {
                            const double mk = view.attenuation[i][k];
                            const double res = mk * ev.rendered[k] - double(view.target[i][k]);
                            const double sg = res > 0 ? 1.0 : (res < 0 ? -1.0 : 0.0);
                            gm[p * nc + (nc == 1 ? 0 : k)] += gscale * sg * ev.rendered[k];
                        }
                    }
                });
            }
            if (!std::isfinite(loss))
                throw NumericalError("non-finite calibration loss at level " + std::to_string(r));
            const double lr = lr_at(std::size_t(it), config.schedule.adam.lr0);
            adam_step(adam, params, grads, lr, mask);
            adam_step(adam_m, m, gm, lr, config.schedule.adam);
            for (double &x : m) x = std::max(x, 1e-6);
            const double mu = window_mean(m, width, height, nc, config.center_fraction);
            for (double &x : m) x /= mu;
            for (double &x : params.kd.data()) x *= mu;
            rec.loss.push_back(loss);
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log_info("calibration level " + std::to_string(r) + ": final loss " +
                 (rec.loss.empty() ? std::string("n/a") : std::to_string(rec.loss.back())));
        result.levels.push_back(std::move(rec));
    }

    result.attenuation = AttenuationMap(width, height, nc);
    auto out = result.attenuation.data();
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = float(m[i]);
    result.albedo = std::move(params.kd);
    return result;
}

// --- evaluation ------------------------------------------------------------

HoldoutMetrics evaluate_holdout(const TextureSet &textures, std::span<const CaptureView> views,
                                const TriMesh &mesh, const AttenuationMap &attenuation,
                                const Vec3d &intensity, int workers) {
    if (views.empty()) throw DataError("no holdout views to evaluate");
    HoldoutMetrics out;
    for (const CaptureView &v : views) {
        const GBuffer gb = rasterize(mesh, v.camera, workers);
        PointLight light{v.camera.center(), intensity};
        const Image rendered =
            shade(gb, textures, light,
                  attenuation_or_ones(attenuation, v.camera.width, v.camera.height),
                  v.polarization, workers);
        Mask mask(gb.pixels.size());
        for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = gb.pixels[p].covered ? 1 : 0;
        if (mask_fraction(mask) == 0) throw DataError("holdout view '" + v.id + "' sees nothing");
        ViewMetrics vm;
        vm.id = v.id;
        vm.polarization = v.polarization;
        vm.psnr = psnr(rendered, v.image, mask);
        vm.ssim = ssim(rendered, v.image, mask);
        out.mean_psnr += vm.psnr;
        out.mean_ssim += vm.ssim;
        out.views.push_back(std::move(vm));
    }
    out.mean_psnr /= double(out.views.size());
    out.mean_ssim /= double(out.views.size());
    return out;
}

Mask observed_texels(std::span<const FitView> views, int resolution) {
    Mask mask(std::size_t(resolution) * resolution, 0);
    for (const FitView &view : views)
        for (const ShadingSample &s : view.geometry.samples) {
            const double c = std::clamp(double(dot(s.normal, s.omega)), 0.0, 1.0);
            if (pixel_weight(c, mip_level(s.footprint, resolution)) <= 0) continue;
            const BilinearFootprint fp(resolution, s.u, s.v);
            for (int k = 0; k < 4; ++k)
                if (fp.weight[k] > 0) mask[fp.texel[k]] = 1;
        }
    return mask;
}

TextureMetrics compare_textures(const TextureSet &recovered, const TextureSet &reference,
                                const Mask &mask) {
    const int r = reference.resolution();
    if (r == 0 || recovered.resolution() != r)
        throw DataError("texture sets must share one resolution to be compared");
    TextureMetrics t;
    t.kd_psnr = texture_psnr(recovered.kd, reference.kd, mask);
    t.ks_psnr = texture_psnr(recovered.ks, reference.ks, mask);
    t.normal_error_deg = normal_angular_error_deg(recovered.normal, reference.normal, mask);
    t.alpha_error = std::abs(recovered.alpha - reference.alpha);
    for (int k = 0; k < 3; ++k)
        t.diffuse_scale_error[k] = std::abs(recovered.diffuse_scale[k] - reference.diffuse_scale[k]);
    t.coverage = mask_fraction(mask);
    return t;
}

// --- end to end ------------------------------------------------------------

namespace {

std::vector<CaptureView> gather(const Dataset &ds, Polarization p, ViewRole r) {
    std::vector<CaptureView> out;
    for (std::size_t i : ds.select(p, r)) out.push_back(ds.views[i]);
    return out;
}

}  // namespace

FitOutputs fit_dataset(const Dataset &dataset, const FitConfig &config, StageSelection stages,
                       const TextureSet *stage1_init) {
    FitOutputs out;
    const int workers = std::max(config.stage1.workers, config.stage2.workers);
    if (stages != StageSelection::Second) {
        const auto cross = gather(dataset, Polarization::Cross, ViewRole::Train);
        const auto views = prepare_views(dataset.mesh, cross, dataset.attenuation, workers);
        out.stage1 = stage1_fit(views, dataset.light_intensity, config.stage1, config.init_alpha);
    } else {
        if (!stage1_init) throw ConfigError("stage 2 alone needs stage-1 textures");
        stage1_init->validate();
        out.stage1.textures = *stage1_init;
    }
    out.textures = out.stage1.textures;

    if (stages != StageSelection::First) {
        const auto parallel = gather(dataset, Polarization::Parallel, ViewRole::Train);
        const auto views = prepare_views(dataset.mesh, parallel, dataset.attenuation, workers);
        out.stage2 = stage2_fit(views, dataset.light_intensity, out.stage1.textures, config.stage2);
        out.textures = out.stage2.textures;
        out.has_stage2 = true;
    }

    std::vector<CaptureView> holdout;
    for (const CaptureView &v : dataset.views)
        if (v.role == ViewRole::Holdout) holdout.push_back(v);
    if (!holdout.empty())
        out.holdout = evaluate_holdout(out.textures, holdout, dataset.mesh, dataset.attenuation,
                                       dataset.light_intensity, workers);
    else
        log_warning("dataset has no holdout views; skipping image metrics");
    return out;
}

void write_loss_csv(const std::filesystem::path &path, const FitOutputs &outputs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "stage,level,iteration,loss\n";
    auto dump = [&](int stage, const StageResult &r) {
        for (const LevelRecord &rec : r.levels)
            for (std::size_t i = 0; i < rec.loss.size(); ++i) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.10g", rec.loss[i]);
                out << stage << ',' << rec.resolution << ',' << i << ',' << buf << '\n';
            }
    };
    dump(1, outputs.stage1);
    if (outputs.has_stage2) dump(2, outputs.stage2);
}

}  // namespace skinfit
