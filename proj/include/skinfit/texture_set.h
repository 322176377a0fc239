// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_TEXTURE_SET_H
#define SKINFIT_TEXTURE_SET_H

#include <skinfit/image.h>

#include <array>
#include <filesystem>
#include <string>

namespace skinfit {

// The optimization unknowns. Normal texels hold tangent-space vectors
// stored directly as floats; flat is (0, 0, 1).
struct TextureSet {
    Texture kd;      // diffuse albedo, RGB
    Texture ks;      // specular gain
    Texture ka;      // ambient, RGB
    Texture normal;  // tangent-space normal
    double alpha = 0.5;
    std::array<double, 3> diffuse_scale{1, 1, 1};

    // Gray kd, zero ks and ka, flat normals.
    static TextureSet make(int resolution, double kd = 0.5);

    // Resolution shared by all maps, or 0 when they differ.
    int resolution() const;
    // Throws DataError when a TextureSet invariant is violated.
    void validate() const;

    void save(const std::filesystem::path &dir, bool previews = true) const;
    static TextureSet load(const std::filesystem::path &dir);
};

// Same shapes as a TextureSet; holds dLoss/dparameter.
struct TextureGradients {
    Texture kd, ks, ka, normal;
    double alpha = 0;
    std::array<double, 3> diffuse_scale{0, 0, 0};

    static TextureGradients zeros_like(const TextureSet &params);
    void set_zero();
    bool all_finite() const;
};

// Which parameter classes an optimization stage updates.
struct ParamMask {
    bool kd = false, ks = false, ka = false, normal = false;
    bool alpha = false, diffuse_scale = false;
};

enum class ParamClass { Kd, Ks, Ka, Normal, Alpha, DiffuseScale };
std::string to_string(ParamClass c);

}  // namespace skinfit

#endif  // SKINFIT_TEXTURE_SET_H
