// SPDX-License-Identifier: Apache-2.0

#include "test_util.h"

#include <skinfit/error.h>
#include <skinfit/pipeline.h>
#include <skinfit/synth.h>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace skinfit {
namespace {

SynthConfig small_config(int views = 8) {
    SynthConfig c;
    c.subdivisions = 16;
    c.texture_resolution = 32;
    c.views = views;
    c.orbit.width = c.orbit.height = 64;
    c.orbit.fx = 200;
    c.sigma = 0;
    c.seed = 31;
    return c;
}

std::vector<CaptureView> pick(const Dataset &ds, Polarization p) {
    std::vector<CaptureView> out;
    for (const CaptureView &v : ds.views)
        if (v.polarization == p) out.push_back(v);
    return out;
}

StageConfig quick_stage(std::vector<int> levels, int iterations) {
    StageConfig s;
    s.schedule.levels = std::move(levels);
    s.schedule.iterations = iterations;
    return s;
}

TEST(InitializeAlbedo, RecoversConstantAlbedo) {
    SynthConfig cfg = small_config();
    cfg.textures.specular = false;
    cfg.textures.normal_bumps = false;
    SynthScene scene = make_scene(cfg);
    scene.ground_truth.kd = Texture(32, 3, 0.6);
    const Dataset ds = render_dataset(scene);
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    const Texture kd = initialize_albedo(views, ds.light_intensity, 32, WeightScheme::MipCosine);
    ASSERT_EQ(kd.resolution(), 32);
    for (double v : kd.data()) EXPECT_NEAR(v, 0.6, 1e-4);
}

TEST(InitializeAlbedo, UnobservedTexelsGetObservedMean) {
    SynthConfig cfg = small_config(2);
    cfg.textures.specular = false;
    cfg.textures.normal_bumps = false;
    const SynthScene scene = make_scene(cfg);
    const Dataset ds = render_dataset(scene);
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    const Texture kd = initialize_albedo(views, ds.light_intensity, 32, WeightScheme::MipCosine);
    // Every texel the initializer deposits on is in the observed mask.
    const Mask seen = observed_texels(views, 32);
    ASSERT_LT(mask_fraction(seen), 1.0);
    std::size_t unseen = 0;
    double first = -1;
    for (std::size_t t = 0; t < seen.size(); ++t) {
        if (seen[t]) continue;
        ++unseen;
        if (first < 0) first = kd[3 * t];
        EXPECT_DOUBLE_EQ(kd[3 * t], first);
    }
    EXPECT_GT(first, 0.1);
    EXPECT_GT(unseen, 0u);
}

TEST(InitializeSpecular, RecoversConstantSpecularUnderTrueMaps) {
    SynthConfig cfg = small_config();
    cfg.textures.normal_bumps = false;
    SynthScene scene = make_scene(cfg);
    scene.ground_truth.ks = Texture(32, 1, 0.3);
    const Dataset ds = render_dataset(scene);
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Parallel), ds.attenuation);
    const Texture ks = initialize_specular(views, ds.light_intensity, scene.ground_truth, 32,
                                           WeightScheme::MipCosine);
    ASSERT_EQ(ks.resolution(), 32);
    for (double v : ks.data()) EXPECT_NEAR(v, 0.3, 1e-4);
}

TEST(InitializeSpecular, ClampsAndFillsUnobserved) {
    SynthConfig cfg = small_config(2);
    const SynthScene scene = make_scene(cfg);
    const Dataset ds = render_dataset(scene);
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Parallel), ds.attenuation);
    TextureSet dark = scene.ground_truth;
    dark.kd = Texture(32, 3, 5.0);
    const Texture ks =
        initialize_specular(views, ds.light_intensity, dark, 32, WeightScheme::MipCosine);
    for (double v : ks.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    const Texture fit = initialize_specular(views, ds.light_intensity, scene.ground_truth, 32,
                                            WeightScheme::MipCosine);
    const Mask seen = observed_texels(views, 32);
    double first = -1;
    for (std::size_t t = 0; t < seen.size(); ++t) {
        if (seen[t]) continue;
        if (first < 0) first = fit[t];
        EXPECT_DOUBLE_EQ(fit[t], first);
    }
    EXPECT_GT(first, 0.0);
}

TEST(Stage1, NeedsFourCrossViews) {
    const Dataset ds = render_dataset(make_scene(small_config(3)));
    const auto cross = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    EXPECT_THROW(stage1_fit(cross, ds.light_intensity, quick_stage({32}, 1)), DataError);

    const Dataset ds8 = render_dataset(make_scene(small_config(8)));
    const auto parallel = prepare_views(ds8.mesh, pick(ds8, Polarization::Parallel), ds8.attenuation);
    EXPECT_THROW(stage1_fit(parallel, ds8.light_intensity, quick_stage({32}, 1)), DataError);
    EXPECT_THROW(stage2_fit(prepare_views(ds8.mesh, pick(ds8, Polarization::Cross), ds8.attenuation),
                            ds8.light_intensity, TextureSet::make(32), quick_stage({32}, 1)),
                 DataError);
}

TEST(Stage1, ZeroIterationsReturnsInitialization) {
    const Dataset ds = render_dataset(make_scene(small_config()));
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    const StageResult r = stage1_fit(views, ds.light_intensity, quick_stage({16, 32}, 0), 0.35);
    const Texture init = initialize_albedo(views, ds.light_intensity, 16, WeightScheme::MipCosine);
    ASSERT_EQ(r.textures.resolution(), 32);
    const Texture up = upsample2x(init);
    for (std::size_t k = 0; k < up.data().size(); ++k) EXPECT_DOUBLE_EQ(r.textures.kd[k], up[k]);
    for (double v : r.textures.ks.data()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(r.textures.alpha, 0.35);
    ASSERT_EQ(r.levels.size(), 2u);
    EXPECT_TRUE(r.levels[0].loss.empty());
}

TEST(Stage1, FlatNormalsStayFlat) {
    SynthConfig cfg = small_config();
    cfg.textures.specular = false;
    cfg.textures.normal_bumps = false;
    const SynthScene scene = make_scene(cfg);
    const Dataset ds = render_dataset(scene);
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    const StageResult r = stage1_fit(views, ds.light_intensity, quick_stage({32}, 150));
    const TextureMetrics m =
        compare_textures(r.textures, scene.ground_truth, observed_texels(views, 32));
    EXPECT_LT(m.normal_error_deg, 2.0);
    EXPECT_GT(m.kd_psnr, 30.0);
}

TEST(Stage1, LossDescends) {
    const Dataset ds = render_dataset(make_scene(small_config()));
    const auto views = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    StageConfig sc = quick_stage({32}, 50);
    sc.schedule.batch_size = int(views.size());
    const StageResult r = stage1_fit(views, ds.light_intensity, sc);
    const auto &loss = r.levels.front().loss;
    ASSERT_EQ(loss.size(), 50u);
    const double head = std::accumulate(loss.begin(), loss.begin() + 10, 0.0);
    const double tail = std::accumulate(loss.end() - 10, loss.end(), 0.0);
    EXPECT_LT(tail, 0.8 * head);
}

TEST(Stage2, FreezesDiffuseMaps) {
    const Dataset ds = render_dataset(make_scene(small_config()));
    const auto cross = prepare_views(ds.mesh, pick(ds, Polarization::Cross), ds.attenuation);
    const auto parallel = prepare_views(ds.mesh, pick(ds, Polarization::Parallel), ds.attenuation);
    const StageResult s1 = stage1_fit(cross, ds.light_intensity, quick_stage({16, 32}, 10));
    const StageResult s2 = stage2_fit(parallel, ds.light_intensity, s1.textures,
                                      quick_stage({16, 32}, 20));
    ASSERT_EQ(s2.textures.resolution(), 32);
    for (std::size_t k = 0; k < s1.textures.kd.data().size(); ++k) {
        ASSERT_EQ(s2.textures.kd[k], s1.textures.kd[k]);
        ASSERT_EQ(s2.textures.ka[k], s1.textures.ka[k]);
    }
    EXPECT_NE(s2.textures.alpha, s1.textures.alpha);
    double ks_sum = 0;
    for (double v : s2.textures.ks.data()) ks_sum += v;
    EXPECT_GT(ks_sum, 0.0);
}

TEST(FitDataset, StageSelection) {
    const Dataset ds = render_dataset(make_scene(small_config()));
    FitConfig fc;
    fc.stage1 = quick_stage({32}, 2);
    fc.stage2 = quick_stage({32}, 2);
    const FitOutputs first = fit_dataset(ds, fc, StageSelection::First);
    EXPECT_FALSE(first.has_stage2);
    for (double v : first.textures.ks.data()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(first.holdout.views.size(), 2u);
    EXPECT_THROW(fit_dataset(ds, fc, StageSelection::Second), ConfigError);
    const FitOutputs second = fit_dataset(ds, fc, StageSelection::Second, &first.textures);
    EXPECT_TRUE(second.has_stage2);
    EXPECT_TRUE(second.stage1.levels.empty());

    test::TempDir dir("fit");
    write_loss_csv(dir / "loss.csv", second);
    const std::string csv = test::read_bytes(dir / "loss.csv");
    EXPECT_EQ(csv.rfind("stage,level,iteration,loss\n2,32,0,", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Holdout, GroundTruthIsPerfectAndDeterministic) {
    const SynthScene scene = make_scene(small_config());
    const Dataset ds = render_dataset(scene);
    const HoldoutMetrics a = evaluate_holdout(scene.ground_truth, ds.views, ds.mesh,
                                              ds.attenuation, ds.light_intensity, 1);
    const HoldoutMetrics b = evaluate_holdout(scene.ground_truth, ds.views, ds.mesh,
                                              ds.attenuation, ds.light_intensity, 3);
    ASSERT_EQ(a.views.size(), ds.views.size());
    EXPECT_EQ(a.mean_psnr, kPsnrCap);
    EXPECT_NEAR(a.mean_ssim, 1.0, 1e-12);
    EXPECT_EQ(a.mean_psnr, b.mean_psnr);
    EXPECT_EQ(a.mean_ssim, b.mean_ssim);

    const TextureSet gray = TextureSet::make(32);
    const HoldoutMetrics c =
        evaluate_holdout(gray, ds.views, ds.mesh, ds.attenuation, ds.light_intensity);
    EXPECT_LT(c.mean_psnr, 40.0);
    EXPECT_THROW(evaluate_holdout(gray, {}, ds.mesh, ds.attenuation, ds.light_intensity),
                 DataError);
}

TEST(CompareTextures, IdenticalAndMismatched) {
    const TextureSet gt = make_gt_textures(16, 4);
    const TextureMetrics m = compare_textures(gt, gt, Mask(256, 1));
    EXPECT_EQ(m.kd_psnr, kPsnrCap);
    EXPECT_EQ(m.ks_psnr, kPsnrCap);
    EXPECT_NEAR(m.normal_error_deg, 0.0, 1e-6);
    EXPECT_EQ(m.alpha_error, 0.0);
    EXPECT_EQ(m.coverage, 1.0);

    TextureSet other = gt;
    other.alpha += 0.1;
    other.diffuse_scale[1] = 1.2;
    const TextureMetrics d = compare_textures(other, gt, Mask(256, 1));
    EXPECT_NEAR(d.alpha_error, 0.1, 1e-12);
    EXPECT_NEAR(d.diffuse_scale_error[1], 0.2, 1e-12);
    EXPECT_THROW(compare_textures(make_gt_textures(32, 4), gt, Mask(256, 1)), DataError);
}

// --- attenuation calibration -----------------------------------------------

SynthConfig plane_config() {
    SynthConfig c;
    c.shape = "plane";
    c.subdivisions = 32;
    c.texture_resolution = 32;
    c.views = 6;
    c.orbit.width = c.orbit.height = 48;
    c.orbit.fx = 400;
    c.sigma = 0;
    c.seed = 5;
    return c;
}

CalibrationConfig quick_calibration(int iterations) {
    CalibrationConfig cc;
    cc.schedule.levels = {32};
    cc.schedule.iterations = iterations;
    cc.schedule.batch_size = 6;
    return cc;
}

TEST(CenterMean, Window) {
    AttenuationMap m(10, 10, 1, 2.f);
    m.at(5, 5, 0) = 102.f;  // inside the central ~3x3 window
    EXPECT_NEAR(center_mean(m, 0.09), (8 * 2 + 102) / 9.0, 1e-9);
    EXPECT_NEAR(center_mean(m, 1.0), 3.0, 1e-9);
    EXPECT_THROW(center_mean(m, 0.0), ConfigError);
    EXPECT_THROW(center_mean(AttenuationMap{}), DataError);
}

TEST(Calibration, UniformAttenuationStaysUniform) {
    const SynthScene scene = make_scene(plane_config());
    const Dataset ds = render_dataset(scene);
    const CalibrationResult r =
        calibrate_attenuation(scene.mesh, ds.views, ds.light_intensity, quick_calibration(150));
    EXPECT_NEAR(center_mean(r.attenuation, 0.1), 1.0, 1e-5);
    double err = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < r.observations.size(); ++p) {
        if (r.observations[p] < 6) continue;
        err += std::abs(r.attenuation.data()[p] - 1.0);
        ++n;
    }
    ASSERT_GT(n, r.observations.size() / 2);
    EXPECT_LT(err / double(n), 0.01);
}

TEST(Calibration, ScaleAmbiguityLeavesRendersUnchanged) {
    const SynthScene scene = make_scene(plane_config());
    const Dataset ds = render_dataset(scene);
    const CaptureView &v = ds.views.front();
    const GBuffer gb = rasterize(scene.mesh, v.camera);
    const PointLight light{v.camera.center(), ds.light_intensity};
    TextureSet t = scene.ground_truth;
    const AttenuationMap ones = attenuation_or_ones({}, v.camera.width, v.camera.height);
    const Image a = shade(gb, t, light, ones, Polarization::Cross);
    for (double &x : t.kd.data()) x /= 1.7;
    AttenuationMap scaled = ones;
    for (float &x : scaled.data()) x = 1.7f;
    const Image b = shade(gb, t, light, scaled, Polarization::Cross);
    for (std::size_t k = 0; k < a.data().size(); ++k)
        EXPECT_NEAR(b.data()[k], a.data()[k], 1e-5 * (1 + a.data()[k]));
}

TEST(Calibration, RejectsBadInput) {
    const SynthScene scene = make_scene(plane_config());
    const Dataset ds = render_dataset(scene);
    CalibrationConfig cc = quick_calibration(1);
    cc.channels = 2;
    EXPECT_THROW(calibrate_attenuation(scene.mesh, ds.views, ds.light_intensity, cc), ConfigError);
    EXPECT_THROW(calibrate_attenuation(scene.mesh, {}, ds.light_intensity, quick_calibration(1)),
                 DataError);
    std::vector<CaptureView> parallel = ds.views;
    parallel[0].polarization = Polarization::Parallel;
    EXPECT_THROW(
        calibrate_attenuation(scene.mesh, parallel, ds.light_intensity, quick_calibration(1)),
        DataError);
}

}  // namespace
}  // namespace skinfit
