// SPDX-License-Identifier: Apache-2.0

#include <skinfit/optim.h>

#include <skinfit/error.h>
#include <skinfit/image.h>
#include <skinfit/log.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace skinfit {

double lr_at(std::size_t t, double lr0) { return lr0 * std::pow(10.0, -0.001 * double(t)); }

AdamState AdamState::for_params(const TextureSet &p, const AdamConfig &config) {
    AdamState s;
    s.config = config;
    s.m_kd.assign(p.kd.data().size(), 0);
    s.v_kd = s.m_kd;
    s.m_ks.assign(p.ks.data().size(), 0);
    s.v_ks = s.m_ks;
    s.m_ka.assign(p.ka.data().size(), 0);
    s.v_ka = s.m_ka;
    s.m_normal.assign(p.normal.data().size(), 0);
    s.v_normal = s.m_normal;
    return s;
}

namespace {

struct AdamCoefficients {
    double beta1, beta2, epsilon, step_size, bias2;
};

inline void adam_update(double &x, double &m, double &v, double g, const AdamCoefficients &c) {
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    x -= c.step_size * m / (std::sqrt(v / c.bias2) + c.epsilon);
}

void update_block(std::span<double> x, std::vector<double> &m, std::vector<double> &v,
                  std::span<const double> g, const AdamCoefficients &c) {
    if (x.size() != g.size() || m.size() != x.size())
        throw DataError("parameter and gradient shapes differ");
    for (double gi : g)
        if (!std::isfinite(gi)) throw NumericalError("non-finite gradient in Adam step");
    for (std::size_t i = 0; i < x.size(); ++i) adam_update(x[i], m[i], v[i], g[i], c);
}

}  // namespace

void adam_step(AdamState &state, TextureSet &params, const TextureGradients &grads, double lr,
               const ParamMask &mask) {
    ++state.step;
    const AdamConfig &cfg = state.config;
    const double t = double(state.step);
    AdamCoefficients c;
    c.beta1 = cfg.beta1;
    c.beta2 = cfg.beta2;
    c.epsilon = cfg.epsilon;
    c.step_size = lr / (1 - std::pow(cfg.beta1, t));
    c.bias2 = 1 - std::pow(cfg.beta2, t);

    if (mask.kd) update_block(params.kd.data(), state.m_kd, state.v_kd, grads.kd.data(), c);
    if (mask.ks) update_block(params.ks.data(), state.m_ks, state.v_ks, grads.ks.data(), c);
    if (mask.ka) update_block(params.ka.data(), state.m_ka, state.v_ka, grads.ka.data(), c);
    if (mask.normal)
        update_block(params.normal.data(), state.m_normal, state.v_normal, grads.normal.data(), c);
    if (mask.alpha) {
        if (!std::isfinite(grads.alpha)) throw NumericalError("non-finite alpha gradient");
        adam_update(params.alpha, state.m_alpha, state.v_alpha, grads.alpha, c);
    }
    if (mask.diffuse_scale)
        for (int k = 0; k < 3; ++k) {
            if (!std::isfinite(grads.diffuse_scale[k]))
                throw NumericalError("non-finite diffuse-scale gradient");
            adam_update(params.diffuse_scale[k], state.m_scale[k], state.v_scale[k],
                        grads.diffuse_scale[k], c);
        }
    project_feasible(params);
}

void adam_step(AdamMoments &moments, std::span<double> x, std::span<const double> grads,
               double lr, const AdamConfig &config) {
    ++moments.step;
    const double t = double(moments.step);
    AdamCoefficients c;
    c.beta1 = config.beta1;
    c.beta2 = config.beta2;
    c.epsilon = config.epsilon;
    c.step_size = lr / (1 - std::pow(config.beta1, t));
    c.bias2 = 1 - std::pow(config.beta2, t);
    update_block(x, moments.m, moments.v, grads, c);
}

void project_feasible(TextureSet &params) {
    for (Texture *t : {&params.kd, &params.ks, &params.ka})
        for (double &v : t->data()) v = std::max(v, 0.0);
    params.alpha = std::clamp(params.alpha, 0.0, 1.0);
    for (double &s : params.diffuse_scale) s = std::max(s, 1e-6);
}

double regularizer(const Texture &ka, const RegularizerWeights &weights, Texture *grad) {
    const int r = ka.resolution(), nc = ka.channels();
    auto sgn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
    double tv = 0, zero = 0;
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i)
            for (int c = 0; c < nc; ++c) {
                const double x = ka.at(i, j, c);
                zero += std::abs(x);
                if (grad) grad->at(i, j, c) += weights.zero * sgn(x);
                if (i + 1 < r) {
                    const double d = ka.at(i + 1, j, c) - x;
                    tv += std::abs(d);
                    if (grad) {
                        grad->at(i + 1, j, c) += weights.tv * sgn(d);
                        grad->at(i, j, c) -= weights.tv * sgn(d);
                    }
                }
                if (j + 1 < r) {
                    const double d = ka.at(i, j + 1, c) - x;
                    tv += std::abs(d);
                    if (grad) {
                        grad->at(i, j + 1, c) += weights.tv * sgn(d);
                        grad->at(i, j, c) -= weights.tv * sgn(d);
                    }
                }
            }
    return weights.tv * tv + weights.zero * zero;
}

BatchSampler::BatchSampler(std::vector<std::size_t> pool, std::size_t batch_size,
                           std::uint64_t seed)
    : pool_(std::move(pool)), batch_size_(batch_size), rng_(seed) {
    if (pool_.empty()) throw DataError("batch sampling needs at least one training view");
    if (batch_size_ < 1) throw ConfigError("batch size must be at least 1");
    reshuffle();
}

void BatchSampler::reshuffle() {
    // Fisher-Yates with an explicit draw so sequences match across standard libraries.
    for (std::size_t i = pool_.size(); i > 1; --i) {
        const std::size_t j = std::size_t(rng_() % i);
        std::swap(pool_[i - 1], pool_[j]);
    }
    cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size_);
    while (batch.size() < batch_size_) {
        if (cursor_ == pool_.size()) reshuffle();
        batch.push_back(pool_[cursor_++]);
    }
    return batch;
}

void ScheduleConfig::validate() const {
    if (levels.empty()) throw ConfigError("schedule needs at least one level");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!is_power_of_two(levels[i]))
            throw ConfigError("level resolution " + std::to_string(levels[i]) +
                              " is not a power of two");
        if (i > 0 && levels[i] != 2 * levels[i - 1])
            throw ConfigError("level resolutions must double from one level to the next");
    }
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
}

CoarseToFineResult coarse_to_fine(const ScheduleConfig &config, TextureSet init,
                                  const ParamMask &mask, const StageObjective &objective,
                                  BatchSampler &sampler) {
    config.validate();
    CoarseToFineResult result;
    TextureSet &params = result.textures;
    params = std::move(init);

    auto check_level = [&](const Texture &t, bool on, const char *name, int r) {
        if (on && t.resolution() != r)
            throw ConfigError(std::string("masked map ") + name + " is not at level resolution " +
                              std::to_string(r));
    };

    for (std::size_t li = 0; li < config.levels.size(); ++li) {
        const int r = config.levels[li];
        if (li > 0) {
            if (mask.kd) params.kd = upsample2x(params.kd);
            if (mask.ks) params.ks = upsample2x(params.ks);
            if (mask.ka) params.ka = upsample2x(params.ka);
            if (mask.normal) params.normal = upsample2x(params.normal);
        }
        check_level(params.kd, mask.kd, "kd", r);
        check_level(params.ks, mask.ks, "ks", r);
        check_level(params.ka, mask.ka, "ka", r);
        check_level(params.normal, mask.normal, "normal", r);

        const auto start = std::chrono::steady_clock::now();
        LevelRecord rec;
        rec.resolution = r;
        AdamState adam = AdamState::for_params(params, config.adam);
        TextureGradients grads = TextureGradients::zeros_like(params);
        for (int it = 0; it < config.iterations; ++it) {
            grads.set_zero();
            const std::vector<std::size_t> batch = sampler.next();
            double loss = objective(params, batch, r, grads);
            if (mask.ka) loss += regularizer(params.ka, config.regularizer, &grads.ka);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite loss at level " + std::to_string(r) +
                                     ", iteration " + std::to_string(it));
            adam_step(adam, params, grads, lr_at(std::size_t(it), config.adam.lr0), mask);
            rec.loss.push_back(loss);
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log_info("level " + std::to_string(r) + ": " + std::to_string(config.iterations) +
                 " iterations, final loss " +
                 (rec.loss.empty() ? std::string("n/a") : std::to_string(rec.loss.back())) +
                 ", " + std::to_string(rec.seconds) + " s");
        result.levels.push_back(std::move(rec));
    }
    return result;
}

}  // namespace skinfit
