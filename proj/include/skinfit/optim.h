// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_OPTIM_H
#define SKINFIT_OPTIM_H

#include <skinfit/texture_set.h>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace skinfit {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lr0 = 1e-3;
};

// lr0 * 10^(-0.001 t); t restarts at every coarse-to-fine level.
double lr_at(std::size_t t, double lr0 = 1e-3);

// First and second moments for every entry of a TextureSet.
struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<double> m_kd, v_kd, m_ks, v_ks, m_ka, v_ka, m_normal, v_normal;
    double m_alpha = 0, v_alpha = 0;
    std::array<double, 3> m_scale{}, v_scale{};

    static AdamState for_params(const TextureSet &params, const AdamConfig &config = {});
};

// Bias-corrected Adam update of the masked classes, followed by projection
// onto the feasible set. Throws NumericalError on a non-finite gradient.
void adam_step(AdamState &state, TextureSet &params, const TextureGradients &grads, double lr,
               const ParamMask &mask);

// Adam over a flat parameter vector (quantities outside a TextureSet).
struct AdamMoments {
    std::vector<double> m, v;
    std::size_t step = 0;

    explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamMoments &moments, std::span<double> x, std::span<const double> grads,
               double lr, const AdamConfig &config);

// kd, ks, ka >= 0; alpha in [0, 1]; diffuse scales > 0.
void project_feasible(TextureSet &params);

struct RegularizerWeights {
    double tv = 1e-2;
    double zero = 1e-3;
};

// tv * sum(|forward differences along u and v|) + zero * sum(|ka|), with
// forward differences that do not wrap. Adds the subgradient to `grad`
// when given.
double regularizer(const Texture &ka, const RegularizerWeights &weights, Texture *grad = nullptr);

// Uniform sampling without replacement within an epoch; reshuffles when the
// pool is exhausted, so batches may straddle epochs.
class BatchSampler {
  public:
    BatchSampler(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed);
    std::vector<std::size_t> next();
    std::size_t batch_size() const { return batch_size_; }

  private:
    void reshuffle();

    std::vector<std::size_t> pool_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
    std::mt19937_64 rng_;
};

struct ScheduleConfig {
    std::vector<int> levels{64, 128, 256, 512};
    int iterations = 2000;  // per level
    int batch_size = 4;
    RegularizerWeights regularizer;
    AdamConfig adam;

    // Throws ConfigError unless resolutions are powers of two, strictly
    // doubling, and the batch size is positive.
    void validate() const;
};

struct LevelRecord {
    int resolution = 0;
    std::vector<double> loss;  // per iteration, regularizer included
    double seconds = 0;
};

// Loss of a batch at the given level resolution; accumulates the gradient
// of that loss into `grads` (zeroed by the caller).
using StageObjective = std::function<double(const TextureSet &, std::span<const std::size_t>,
                                            int resolution, TextureGradients &)>;

struct CoarseToFineResult {
    TextureSet textures;
    std::vector<LevelRecord> levels;
};

// Runs the schedule: per level, a fresh Adam state with the learning rate
// restarted at lr0, then a 2x bilinear upsample of every masked map before
// the next level. Masked maps in `init` must be at the first level's
// resolution; unmasked maps are left as they are.
CoarseToFineResult coarse_to_fine(const ScheduleConfig &config, TextureSet init,
                                  const ParamMask &mask, const StageObjective &objective,
                                  BatchSampler &sampler);

}  // namespace skinfit

#endif  // SKINFIT_OPTIM_H
