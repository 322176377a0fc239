// SPDX-License-Identifier: Apache-2.0

#include <skinfit/grad.h>

#include <skinfit/error.h>
#include <skinfit/parallel.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace skinfit {

FitView prepare_view(SampleBuffer geometry, const Image &target, const AttenuationMap &attenuation,
                     Polarization mode) {
    if (target.width() != geometry.width || target.height() != geometry.height)
        throw DataError("target image size does not match the rendered view");
    if (target.channels() != 3) throw DataError("target image must be RGB");
    if (attenuation.width() != geometry.width || attenuation.height() != geometry.height)
        throw DataError("attenuation map size does not match the view");
    FitView v;
    v.mode = mode;
    v.target.reserve(geometry.size());
    v.attenuation.reserve(geometry.size());
    for (std::uint32_t p : geometry.pixel) {
        v.target.push_back({target.channel(p, 0), target.channel(p, 1), target.channel(p, 2)});
        v.attenuation.push_back(
            {attenuation.channel(p, 0), attenuation.channel(p, 1), attenuation.channel(p, 2)});
    }
    v.geometry = std::move(geometry);
    return v;
}

FitView prepare_view(const GBuffer &gbuffer, const Image &target, const AttenuationMap &attenuation,
                     Polarization mode) {
    return prepare_view(compact(gbuffer), target, attenuation, mode);
}

namespace {

double weight_for(const ShadingSample &s, double cosv, const WeightPolicy &policy) {
    switch (policy.scheme) {
    case WeightScheme::MipCosine: return pixel_weight(cosv, mip_level(s.footprint, policy.resolution));
    case WeightScheme::Cosine: return std::clamp(cosv, 0.0, 1.0);
    case WeightScheme::Unit: return 1.0;
    }
    return 0;
}

double shading_cos(const ShadingSample &s, const Texture &normal) {
    const Vec3d n = decode_normal(s, bilinear_sample(normal, {s.u, s.v}));
    return std::clamp(dot(n, Vec3d(s.omega)), 0.0, 1.0);
}

double sign_of(double r) { return r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0); }

// Gradient contributions of one covered pixel, before the scatter to texels.
struct PixelGrad {
    double loss = 0;
    bool active = false;
    double kd[3]{}, ks = 0, ka[3]{}, normal[3]{}, alpha = 0, scale[3]{};
};

}  // namespace

std::vector<double> compute_weights(const FitView &view, const TextureSet &textures,
                                    const WeightPolicy &policy) {
    std::vector<double> w(view.covered());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const ShadingSample &s = view.geometry.samples[i];
        const double c = policy.scheme == WeightScheme::Unit ? 1.0 : shading_cos(s, textures.normal);
        w[i] = weight_for(s, c, policy);
    }
    return w;
}

double loss_forward(const Image &rendered, const Image &target, const Image &weights,
                    std::size_t covered_pixels) {
    if (!rendered.same_shape(target)) throw DataError("rendered and target images differ in shape");
    if (weights.width() != rendered.width() || weights.height() != rendered.height() ||
        weights.channels() != 1)
        throw DataError("weight map must be single-channel and match the image");
    if (covered_pixels == 0) return 0;
    double sum = 0;
    for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
        const double w = weights.channel(p, 0);
        if (w == 0) continue;
        for (int c = 0; c < rendered.channels(); ++c)
            sum += w * std::abs(double(rendered.channel(p, c)) - double(target.channel(p, c)));
    }
    return sum / double(covered_pixels);
}

double backward(const FitView &view, const TextureSet &textures, const Vec3d &intensity,
                TextureGradients &grads, const BackwardOptions &options) {
    const std::size_t n = view.covered();
    if (n == 0) return 0;
    if (!options.weights.empty() && options.weights.size() != n)
        throw DataError("weight count does not match covered pixels");
    const bool parallel = view.mode == Polarization::Parallel;
    const double inv_n = 1.0 / double(n);
    const double gscale = options.scale * inv_n;

    std::vector<PixelGrad> records(n);
    parallel_for(n, options.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const ShadingSample &s = view.geometry.samples[i];
            const SampleFootprints fp(textures, s.u, s.v);
            brdf::BrdfDerivatives d;
            const SampleEval e = evaluate_sample(s, fp, textures, intensity,
                                                 Vec3d(view.attenuation[i]), view.mode, &d);
            const double w = options.weights.empty() ? weight_for(s, e.inputs.cosv, options.policy)
                                                     : options.weights[i];
            PixelGrad &r = records[i];
            if (w == 0) continue;
            double g[3];
            for (int k = 0; k < 3; ++k) {
                const double res = e.rendered[k] - double(view.target[i][k]);
                r.loss += w * std::abs(res);
                g[k] = w * sign_of(res) * e.attenuation[k] * gscale;
            }
            if (e.raw_cos <= 0) continue;
            r.active = true;
            double dcos = 0;
            for (int k = 0; k < 3; ++k) {
                const double dkd_eff = g[k] * d.d_kd[k];
                if (parallel) {
                    r.kd[k] = dkd_eff * textures.diffuse_scale[k];
                    r.scale[k] = dkd_eff * e.kd_texel[k];
                } else {
                    r.kd[k] = dkd_eff;
                }
                r.ks += g[k] * d.d_ks[k];
                r.ka[k] = g[k] * d.d_ka[k];
                r.alpha += g[k] * d.d_alpha[k];
                dcos += g[k] * d.d_cosv[k];
            }
            if (!e.normal_fallback) {
                // cos = normalize(m) . omega with m = nx t + ny b + nz n.
                const Vec3d omega(s.omega);
                const double mlen = length(e.unnormalized_normal);
                const Vec3d dcos_dm =
                    (omega - e.shading_normal * dot(e.shading_normal, omega)) * (dcos / mlen);
                r.normal[0] = dot(dcos_dm, Vec3d(s.tangent));
                r.normal[1] = dot(dcos_dm, Vec3d(s.bitangent));
                r.normal[2] = dot(dcos_dm, Vec3d(s.normal));
            }
        }
    });

    // Scatter in pixel order so the sums do not depend on the worker count.
    const ParamMask &m = options.mask;
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const PixelGrad &r = records[i];
        loss += r.loss;
        if (!r.active) continue;
        const ShadingSample &s = view.geometry.samples[i];
        const SampleFootprints fp(textures, s.u, s.v);
        if (m.kd) bilinear_splat(grads.kd, fp.kd, {r.kd[0], r.kd[1], r.kd[2]});
        if (m.ks) bilinear_splat(grads.ks, fp.ks, {r.ks, 0, 0});
        if (m.ka) bilinear_splat(grads.ka, fp.ka, {r.ka[0], r.ka[1], r.ka[2]});
        if (m.normal) bilinear_splat(grads.normal, fp.normal, {r.normal[0], r.normal[1], r.normal[2]});
        if (m.alpha) grads.alpha += r.alpha;
        if (m.diffuse_scale)
            for (int k = 0; k < 3; ++k) grads.diffuse_scale[k] += r.scale[k];
    }
    return loss * inv_n;
}

LossAndGradients backward(const GBuffer &gbuffer, const TextureSet &textures,
                          const PointLight &light, const AttenuationMap &attenuation,
                          Polarization mode, const Image &target, const Image &weights) {
    const FitView view = prepare_view(gbuffer, target, attenuation, mode);
    if (weights.width() != gbuffer.width || weights.height() != gbuffer.height ||
        weights.channels() != 1)
        throw DataError("weight map must be single-channel and match the image");
    std::vector<double> w;
    w.reserve(view.covered());
    for (std::uint32_t p : view.geometry.pixel) w.push_back(weights.channel(p, 0));
    LossAndGradients out;
    out.gradients = TextureGradients::zeros_like(textures);
    BackwardOptions opt;
    opt.weights = w;
    out.loss = backward(view, textures, light.intensity, out.gradients, opt);
    return out;
}

double forward_loss(const FitView &view, const TextureSet &textures, const Vec3d &intensity,
                    std::span<const double> weights, std::vector<std::int8_t> *residual_signs) {
    const std::size_t n = view.covered();
    if (n == 0) return 0;
    if (weights.size() != n) throw DataError("weight count does not match covered pixels");
    if (residual_signs) residual_signs->clear();
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == 0) continue;
        const ShadingSample &s = view.geometry.samples[i];
        const SampleEval e = evaluate_sample(s, SampleFootprints(textures, s.u, s.v), textures,
                                             intensity, Vec3d(view.attenuation[i]), view.mode);
        double l = 0;
        for (int k = 0; k < 3; ++k) {
            const double res = e.rendered[k] - double(view.target[i][k]);
            l += std::abs(res);
            if (residual_signs) residual_signs->push_back(std::int8_t(sign_of(res)));
        }
        loss += weights[i] * l;
    }
    return loss / double(n);
}

// --- finite differences -----------------------------------------------------

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

namespace {

struct Objective {
    const GradCheckScene &scene;

    double operator()(const TextureSet &t, std::vector<std::vector<std::int8_t>> *signs) const {
        double total = 0;
        if (signs) signs->resize(scene.views.size());
        for (std::size_t v = 0; v < scene.views.size(); ++v)
            total += forward_loss(scene.views[v], t, scene.intensity, scene.weights[v],
                                  signs ? &(*signs)[v] : nullptr);
        return total / double(scene.views.size());
    }
};

Texture &texture_of(TextureSet &t, ParamClass c) {
    switch (c) {
    case ParamClass::Kd: return t.kd;
    case ParamClass::Ks: return t.ks;
    case ParamClass::Ka: return t.ka;
    default: return t.normal;
    }
}

const Texture &gradient_of(const TextureGradients &g, ParamClass c) {
    switch (c) {
    case ParamClass::Kd: return g.kd;
    case ParamClass::Ks: return g.ks;
    case ParamClass::Ka: return g.ka;
    default: return g.normal;
    }
}

bool class_enabled(const ParamMask &m, ParamClass c) {
    switch (c) {
    case ParamClass::Kd: return m.kd;
    case ParamClass::Ks: return m.ks;
    case ParamClass::Ka: return m.ka;
    case ParamClass::Normal: return m.normal;
    case ParamClass::Alpha: return m.alpha;
    case ParamClass::DiffuseScale: return m.diffuse_scale;
    }
    return false;
}

// Central difference of the objective in one scalar parameter; returns
// false when a residual changes sign across the stencil (L1 kink).
bool central_difference(const Objective &f, TextureSet &t, double &param, double h,
                        const std::vector<std::vector<std::int8_t>> &base_signs, double &out) {
    const double saved = param;
    std::vector<std::vector<std::int8_t>> sp, sm;
    param = saved + h;
    const double fp = f(t, &sp);
    param = saved - h;
    const double fm = f(t, &sm);
    param = saved;
    out = (fp - fm) / (2 * h);
    return sp == base_signs && sm == base_signs;
}

}  // namespace

GradCheckReport finite_diff_check(const GradCheckScene &scene, const GradCheckOptions &options) {
    if (scene.views.size() != scene.weights.size())
        throw DataError("gradient check needs one weight vector per view");
    const Objective f{scene};
    TextureSet t = scene.textures;

    TextureGradients analytic = TextureGradients::zeros_like(t);
    BackwardOptions bopt;
    bopt.scale = 1.0 / double(scene.views.size());
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        bopt.weights = scene.weights[v];
        backward(scene.views[v], t, scene.intensity, analytic, bopt);
    }
    for (double &g : analytic.ks.data()) g *= options.corrupt_ks;

    std::vector<std::vector<std::int8_t>> base_signs;
    f(t, &base_signs);

    std::mt19937_64 rng(options.seed);
    GradCheckReport report;
    for (ParamClass cls : {ParamClass::Kd, ParamClass::Ks, ParamClass::Ka, ParamClass::Normal,
                           ParamClass::Alpha, ParamClass::DiffuseScale}) {
        if (!class_enabled(options.classes, cls)) continue;
        ClassReport cr;
        cr.cls = cls;
        double sum_err = 0;
        auto record = [&](double a, double numeric) {
            const double err = relative_error(a, numeric);
            cr.max_rel_error = std::max(cr.max_rel_error, err);
            sum_err += err;
            ++cr.checked;
        };

        if (cls == ParamClass::Alpha) {
            double numeric = 0;
            central_difference(f, t, t.alpha, options.scalar_step, base_signs, numeric);
            record(analytic.alpha, numeric);
        } else if (cls == ParamClass::DiffuseScale) {
            for (int k = 0; k < 3; ++k) {
                double numeric = 0;
                central_difference(f, t, t.diffuse_scale[k], options.scalar_step, base_signs,
                                   numeric);
                record(analytic.diffuse_scale[k], numeric);
            }
        } else {
            Texture &tex = texture_of(t, cls);
            const Texture &grad = gradient_of(analytic, cls);
            // Candidates: entries any weighted pixel reaches.
            std::vector<std::size_t> touched;
            for (std::size_t k = 0; k < grad.data().size(); ++k)
                if (grad[k] != 0) touched.push_back(k);
            if (touched.empty()) {
                // Nothing reaches this map (ks in cross mode): trivially exact.
                report.classes.push_back(cr);
                continue;
            }
            std::set<std::size_t> used;
            const int wanted = std::min<int>(options.samples_per_map, int(touched.size()));
            int attempts = 0;
            while (cr.checked < wanted && attempts < 20 * wanted) {
                ++attempts;
                const std::size_t k = touched[std::uniform_int_distribution<std::size_t>(
                    0, touched.size() - 1)(rng)];
                if (!used.insert(k).second) continue;
                double numeric = 0;
                if (!central_difference(f, t, tex[k], options.texel_step, base_signs, numeric)) {
                    ++cr.redrawn;
                    continue;
                }
                record(grad[k], numeric);
            }
        }
        cr.mean_rel_error = cr.checked ? sum_err / cr.checked : 0;
        cr.pass = cr.checked > 0 && cr.max_rel_error < options.threshold;
        report.pass = report.pass && cr.pass;
        report.classes.push_back(cr);
    }
    return report;
}

std::string GradCheckReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    for (const ClassReport &c : classes)
        j["classes"].push_back({{"class", to_string(c.cls)},
                                {"checked", c.checked},
                                {"redrawn", c.redrawn},
                                {"max_rel_error", c.max_rel_error},
                                {"mean_rel_error", c.mean_rel_error},
                                {"pass", c.pass}});
    return j.dump(2);
}

}  // namespace skinfit
