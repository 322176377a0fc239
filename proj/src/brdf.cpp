// SPDX-License-Identifier: Apache-2.0

#include <skinfit/brdf.h>

#include <skinfit/error.h>

#include <algorithm>
#include <cmath>

namespace skinfit::brdf {

namespace {

constexpr double kDiffuseNorm = 28.0 / (23.0 * kPi) * (1.0 - kF0);
constexpr double kWideNorm = (kWideLobe + 2) / (2.0 * kPi);
constexpr double kNarrowNorm = (kNarrowLobe + 2) / (2.0 * kPi);

double int_pow(double x, int n) {
    double r = 1;
    while (n > 0) {
        if (n & 1) r *= x;
        x *= x;
        n >>= 1;
    }
    return r;
}

// Angular pieces shared by the radiance and its derivatives. `spec` is
// cosv * f_s / ks = D G F / (4 cosv), which stays finite at cosv = 0.
struct Angular {
    double c = 0;
    double g = 0, dg = 0;          // (1 - (1 - c/2)^5)^2 and its derivative
    double spec = 0, dspec = 0;    // D G F / (4c) and d/dc
    double dspec_dalpha = 0;
};

Angular angular_terms(double cosv, double alpha, bool with_specular) {
    Angular a;
    const double c = std::clamp(cosv, 0.0, 1.0);
    a.c = c;
    const double q = 1 - 0.5 * c;
    const double q2 = q * q, q4 = q2 * q2;
    const double s = 1 - q4 * q;
    a.g = s * s;
    a.dg = 5 * s * q4;
    if (!with_specular) return a;

    const double c2 = c * c, c4 = c2 * c2, c8 = c4 * c4, c16 = c8 * c8, c32 = c16 * c16;
    const double c10 = c8 * c2, c11 = c10 * c;
    const double c46 = c32 * c8 * c4 * c2, c47 = c46 * c;
    // D / c and its derivative.
    const double dc = alpha * kWideNorm * c11 + (1 - alpha) * kNarrowNorm * c47;
    const double ddc = alpha * kWideNorm * 11 * c10 + (1 - alpha) * kNarrowNorm * 47 * c46;
    const double ddc_dalpha = kWideNorm * c11 - kNarrowNorm * c47;

    const double g_mask = std::min(1.0, 2 * c2);
    const double dg_mask = 2 * c2 < 1 ? 4 * c : 0.0;
    const double omc = 1 - c, omc2 = omc * omc, omc4 = omc2 * omc2;
    const double f = kF0 + (1 - kF0) * omc4 * omc;
    const double df = -5 * (1 - kF0) * omc4;

    a.spec = 0.25 * dc * g_mask * f;
    a.dspec = 0.25 * (ddc * g_mask * f + dc * dg_mask * f + dc * g_mask * df);
    a.dspec_dalpha = 0.25 * ddc_dalpha * g_mask * f;
    return a;
}

void check_dist(double dist) {
    if (!(dist > 0)) throw NumericalError("shading distance must be positive");
}

}  // namespace

double fresnel_schlick(double cosv) {
    const double omc = 1 - std::clamp(cosv, 0.0, 1.0);
    return kF0 + (1 - kF0) * int_pow(omc, 5);
}

double blinn_phong_lobe(double cosv, int exponent) {
    return (exponent + 2) / (2.0 * kPi) * int_pow(std::clamp(cosv, 0.0, 1.0), exponent);
}

double blinn_phong_D(double cosv, double alpha) {
    return alpha * blinn_phong_lobe(cosv, kWideLobe) +
           (1 - alpha) * blinn_phong_lobe(cosv, kNarrowLobe);
}

double geometry_term(double cosv) {
    const double c = std::clamp(cosv, 0.0, 1.0);
    return std::min(1.0, 2 * c * c);
}

Vec3d f_specular(const ShadingInputs &in) {
    const double c = std::clamp(in.cosv, 0.0, 1.0);
    if (c <= 0) return {};
    const double v = in.ks * blinn_phong_D(c, in.alpha) * geometry_term(c) * fresnel_schlick(c) /
                     (4 * c * c);
    return {v, v, v};
}

Vec3d f_diffuse(const ShadingInputs &in) {
    const Angular a = angular_terms(in.cosv, in.alpha, false);
    return in.kd * (kDiffuseNorm * a.g);
}

Vec3d f_ambient(const ShadingInputs &in) {
    const Angular a = angular_terms(in.cosv, in.alpha, false);
    return in.ka * (1 - (1 - kF0) * a.g);
}

Vec3d radiance(const ShadingInputs &in, Polarization mode, BrdfDerivatives *derivs) {
    check_dist(in.dist);
    const bool parallel = mode == Polarization::Parallel;
    const Angular a = angular_terms(in.cosv, in.alpha, parallel);
    const double inv_d2 = 1 / (in.dist * in.dist);
    const double amb = 1 - (1 - kF0) * a.g;
    Vec3d out;
    for (int k = 0; k < 3; ++k) {
        const double f = kDiffuseNorm * in.kd[k] * a.g + in.ka[k] * amb;
        out[k] = in.intensity[k] * inv_d2 * (a.c * f + (parallel ? in.ks * a.spec : 0.0));
    }
    if (!derivs) return out;

    BrdfDerivatives &d = *derivs;
    d = {};
    if (!(in.cosv > 0)) return out;  // back-facing: no light, no gradient
    const double damb = -(1 - kF0) * a.dg;
    for (int k = 0; k < 3; ++k) {
        const double fall = in.intensity[k] * inv_d2;
        const double f = kDiffuseNorm * in.kd[k] * a.g + in.ka[k] * amb;
        const double df = kDiffuseNorm * in.kd[k] * a.dg + in.ka[k] * damb;
        d.d_kd[k] = fall * a.c * kDiffuseNorm * a.g;
        d.d_ka[k] = fall * a.c * amb;
        if (parallel) {
            d.d_ks[k] = fall * a.spec;
            d.d_alpha[k] = fall * in.ks * a.dspec_dalpha;
        }
        d.d_cosv[k] = fall * (f + a.c * df + (parallel ? in.ks * a.dspec : 0.0));
    }
    return out;
}

Vec3d radiance(const ShadingInputs &in, Polarization mode) { return radiance(in, mode, nullptr); }

BrdfDerivatives radiance_derivatives(const ShadingInputs &in, Polarization mode) {
    BrdfDerivatives d;
    radiance(in, mode, &d);
    return d;
}

}  // namespace skinfit::brdf
