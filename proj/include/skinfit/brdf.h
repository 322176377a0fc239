// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_BRDF_H
#define SKINFIT_BRDF_H

#include <skinfit/camera.h>
#include <skinfit/vecmath.h>

namespace skinfit::brdf {

// Skin reflectance at normal incidence.
inline constexpr double kF0 = 0.04;
// Blinn-Phong exponents of the two specular lobes.
inline constexpr int kWideLobe = 12;
inline constexpr int kNarrowLobe = 48;

// Everything needed to shade one point lit by a light at the camera.
struct ShadingInputs {
    double cosv = 1;  // n . omega with the shading normal, in [0, 1]
    double dist = 1;  // distance from the point to the camera/light
    Vec3d kd;
    double ks = 0;
    Vec3d ka;
    double alpha = 0.5;  // weight of the wide lobe
    Vec3d intensity{10, 10, 10};
};

// Partial derivatives of the outgoing radiance, per color channel.
struct BrdfDerivatives {
    Vec3d d_kd;  // diagonal: dL_c / dkd_c
    Vec3d d_ks;
    Vec3d d_ka;  // diagonal: dL_c / dka_c
    Vec3d d_alpha;
    Vec3d d_cosv;
};

double fresnel_schlick(double cosv);

// Normalized Blinn-Phong lobe ((p + 2) / 2pi) c^p.
double blinn_phong_lobe(double cosv, int exponent);
// alpha * D12 + (1 - alpha) * D48. With the light at the camera the half
// vector is the view direction, so n . h = cosv.
double blinn_phong_D(double cosv, double alpha);
// Cook-Torrance masking for h = omega: min(1, 2 cosv^2).
double geometry_term(double cosv);

// ks D G F / (4 cosv^2); zero at cosv = 0.
Vec3d f_specular(const ShadingInputs &in);
// 28 kd / (23 pi) (1 - F0) (1 - (1 - cosv/2)^5)^2
Vec3d f_diffuse(const ShadingInputs &in);
// ka (1 - (1 - F0) (1 - (1 - cosv/2)^5)^2)
Vec3d f_ambient(const ShadingInputs &in);

// L = (f_d + f_a + [parallel] f_s) cosv I / dist^2. Throws on dist <= 0.
Vec3d radiance(const ShadingInputs &in, Polarization mode);
// Radiance plus, when `derivs` is non-null, its partial derivatives.
Vec3d radiance(const ShadingInputs &in, Polarization mode, BrdfDerivatives *derivs);
BrdfDerivatives radiance_derivatives(const ShadingInputs &in, Polarization mode);

}  // namespace skinfit::brdf

#endif  // SKINFIT_BRDF_H
