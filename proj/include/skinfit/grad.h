// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_GRAD_H
#define SKINFIT_GRAD_H

#include <skinfit/raster.h>
#include <skinfit/texture_set.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace skinfit {

// One observation ready for fitting: covered-pixel geometry with the target
// radiance and attenuation gathered at each covered pixel.
struct FitView {
    SampleBuffer geometry;
    std::vector<Vec3f> target;
    std::vector<Vec3f> attenuation;
    Polarization mode = Polarization::Cross;

    std::size_t covered() const { return geometry.size(); }
};

FitView prepare_view(const GBuffer &gbuffer, const Image &target,
                     const AttenuationMap &attenuation, Polarization mode);
FitView prepare_view(SampleBuffer geometry, const Image &target,
                     const AttenuationMap &attenuation, Polarization mode);

// How the per-pixel loss weight W is formed.
enum class WeightScheme {
    MipCosine,  // cosv (1 - l) for l < 1, else 0
    Cosine,     // cosv only
    Unit,       // 1 on every covered pixel
};

struct WeightPolicy {
    WeightScheme scheme = WeightScheme::MipCosine;
    int resolution = 0;  // texture resolution the mip level refers to
};

// W per covered pixel, from the current shading normals.
std::vector<double> compute_weights(const FitView &view, const TextureSet &textures,
                                    const WeightPolicy &policy);

// Sum over covered pixels and channels of W |rendered - target|, divided by
// the covered-pixel count. `weights` is a 1-channel image, zero off-surface.
double loss_forward(const Image &rendered, const Image &target, const Image &weights,
                    std::size_t covered_pixels);

struct BackwardOptions {
    // Fixed weights (one per covered pixel). When empty, W is formed from
    // `policy` with the shading normals of the current textures.
    std::span<const double> weights;
    WeightPolicy policy;
    ParamMask mask{true, true, true, true, true, true};
    double scale = 1;  // multiplies every accumulated gradient
    int workers = 1;
};

// Loss of one view (normalized by its covered-pixel count) and, accumulated
// into `grads` with `options.scale`, its gradient with respect to every
// masked parameter class.
double backward(const FitView &view, const TextureSet &textures, const Vec3d &intensity,
                TextureGradients &grads, const BackwardOptions &options = {});

struct LossAndGradients {
    double loss = 0;
    TextureGradients gradients;
};

// Dense convenience form over a rasterized view; `weights` is a 1-channel
// image as for loss_forward.
LossAndGradients backward(const GBuffer &gbuffer, const TextureSet &textures,
                          const PointLight &light, const AttenuationMap &attenuation,
                          Polarization mode, const Image &target, const Image &weights);

// Forward loss only. `residual_signs`, when given, receives sign(rendered -
// target) for every weighted pixel channel (used to detect L1 kinks).
double forward_loss(const FitView &view, const TextureSet &textures, const Vec3d &intensity,
                    std::span<const double> weights,
                    std::vector<std::int8_t> *residual_signs = nullptr);

// --- finite-difference verification ---------------------------------------

struct GradCheckScene {
    std::vector<FitView> views;
    std::vector<std::vector<double>> weights;  // fixed W per view
    TextureSet textures;
    Vec3d intensity{10, 10, 10};
};

struct GradCheckOptions {
    int samples_per_map = 100;
    double texel_step = 1e-4;
    double scalar_step = 1e-5;
    double threshold = 1e-3;
    std::uint64_t seed = 1;
    ParamMask classes{true, true, true, true, true, true};
    // Multiplies the analytic ks gradient; anything but 1 must make the
    // check fail.
    double corrupt_ks = 1.0;
};

struct ClassReport {
    ParamClass cls = ParamClass::Kd;
    int checked = 0;
    int redrawn = 0;  // texel samples redrawn because a residual changed sign
    double max_rel_error = 0;
    double mean_rel_error = 0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<ClassReport> classes;
    bool pass = true;
    std::string to_json() const;
};

double relative_error(double a, double b);

GradCheckReport finite_diff_check(const GradCheckScene &scene, const GradCheckOptions &options);

}  // namespace skinfit

#endif  // SKINFIT_GRAD_H
