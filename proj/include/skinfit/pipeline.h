// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_PIPELINE_H
#define SKINFIT_PIPELINE_H

#include <skinfit/color.h>
#include <skinfit/dataset.h>
#include <skinfit/grad.h>
#include <skinfit/metrics.h>
#include <skinfit/optim.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace skinfit {

struct StageResult {
    TextureSet textures;
    std::vector<LevelRecord> levels;
};

struct StageConfig {
    ScheduleConfig schedule;
    WeightScheme weights = WeightScheme::MipCosine;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct FitConfig {
    StageConfig stage1;
    StageConfig stage2;
    double init_alpha = 0.5;
};

// Rasterizes and compacts the given views against the mesh. Views with no
// covered pixel are rejected with a DataError.
std::vector<FitView> prepare_views(const TriMesh &mesh, std::span<const CaptureView> views,
                                   const AttenuationMap &attenuation, int workers = 1);

// Albedo from averaged back-projection: every covered pixel of every view
// divides its observation by the shading of a unit albedo (flat normal,
// zero ambient, attenuation and falloff included) and deposits it on its
// bilinear texels with weight W * bilinear weight. Texels that receive no
// weight get the mean of the observed ones.
Texture initialize_albedo(std::span<const FitView> views, const Vec3d &intensity, int resolution,
                          WeightScheme scheme);

// Specular albedo by per-texel weighted least squares: every covered pixel
// of every parallel view contributes its residual after the current
// non-specular shading, against the shading of a unit ks under the current
// normals, alpha and attenuation. Weights are W times the bilinear weight.
// Results are clamped to [0, 1]; texels without weight get the mean.
Texture initialize_specular(std::span<const FitView> views, const Vec3d &intensity,
                            const TextureSet &textures, int resolution, WeightScheme scheme);

// Stage 1: kd, normal and ka over the coarse-to-fine schedule in cross mode.
// Needs at least 4 views, all prepared in cross mode. ks is returned as
// zeros at the last level and alpha as `init_alpha`.
StageResult stage1_fit(std::span<const FitView> cross_views, const Vec3d &intensity,
                       const StageConfig &config, double init_alpha = 0.5);

// Stage 2: kd and ka frozen; ks (from initialize_specular), alpha, diffuse_scale and the
// normal map (from stage 1, box-filtered down to the first level) are
// optimized in parallel mode.
StageResult stage2_fit(std::span<const FitView> parallel_views, const Vec3d &intensity,
                       const TextureSet &stage1, const StageConfig &config);

// --- attenuation calibration ---------------------------------------------

struct CalibrationConfig {
    // Levels apply to the plane's albedo texture; M lives on the image grid.
    ScheduleConfig schedule;
    int channels = 1;                 // 1 (monochrome) or 3
    double center_fraction = 0.1;     // area fraction of the normalization window
    int workers = 1;
    std::uint64_t seed = 0;
};

struct CalibrationResult {
    AttenuationMap attenuation;
    Texture albedo;
    std::vector<LevelRecord> levels;
    std::vector<std::uint16_t> observations;  // views covering each pixel
};

// Jointly fits M (initialized to 1) and the plane albedo with unit weights.
// After every step M is rescaled so its mean over the central window is 1
// and the albedo takes the inverse factor, which leaves renders unchanged.
CalibrationResult calibrate_attenuation(const TriMesh &plane, std::span<const CaptureView> views,
                                        const Vec3d &intensity, const CalibrationConfig &config);

// Mean of M over the central window covering `fraction` of the image area.
double center_mean(const AttenuationMap &m, double fraction = 0.1);

// --- evaluation ------------------------------------------------------------

struct ViewMetrics {
    std::string id;
    Polarization polarization = Polarization::Cross;
    double psnr = 0;
    double ssim = 0;
};

struct HoldoutMetrics {
    std::vector<ViewMetrics> views;
    double mean_psnr = 0;
    double mean_ssim = 0;
};

// Renders each view in its own polarization mode and scores it against
// its image over the covered pixels.
HoldoutMetrics evaluate_holdout(const TextureSet &textures, std::span<const CaptureView> views,
                                const TriMesh &mesh, const AttenuationMap &attenuation,
                                const Vec3d &intensity, int workers = 1);

// Texels receiving at least one observation with positive mip/cosine
// weight (geometric normals) at the given resolution.
Mask observed_texels(std::span<const FitView> views, int resolution);

struct TextureMetrics {
    double kd_psnr = 0;
    double ks_psnr = 0;
    double normal_error_deg = 0;
    double alpha_error = 0;
    std::array<double, 3> diffuse_scale_error{};
    double coverage = 0;  // fraction of texels in the mask
};

// Compares against a reference set of the same resolution over `mask`.
TextureMetrics compare_textures(const TextureSet &recovered, const TextureSet &reference,
                                const Mask &mask);

// --- end to end ------------------------------------------------------------

enum class StageSelection { First, Second, Both };

struct FitOutputs {
    StageResult stage1;
    StageResult stage2;
    TextureSet textures;  // final
    HoldoutMetrics holdout;
    bool has_stage2 = false;
};

// Stage 1 on the cross train views, then stage 2 on the parallel train
// views; holdout views are scored with the final textures.
// `stage1_init`, when given, replaces stage 1 (used with StageSelection::Second).
FitOutputs fit_dataset(const Dataset &dataset, const FitConfig &config, StageSelection stages,
                       const TextureSet *stage1_init = nullptr);

// Loss history as CSV: stage,level,iteration,loss.
void write_loss_csv(const std::filesystem::path &path, const FitOutputs &outputs);

}  // namespace skinfit

#endif  // SKINFIT_PIPELINE_H
