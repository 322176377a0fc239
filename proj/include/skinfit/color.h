// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_COLOR_H
#define SKINFIT_COLOR_H

#include <skinfit/image.h>
#include <skinfit/vecmath.h>

#include <filesystem>
#include <vector>

namespace skinfit {

// c' = A c + b, clamped below at 0 when applied to images.
struct ColorAffine {
    Mat3 A;
    Vec3d b;

    Vec3d apply(const Vec3d &c) const { return A * c + b; }
};

// Least-squares (A, b) minimizing sum |A m_i + b - r_i|^2 via the normal
// equations. Needs at least 4 patch pairs whose measured colors span an
// affine basis; throws NumericalError on a rank-deficient patch set.
ColorAffine fit_color_affine(const std::vector<Vec3d> &measured,
                             const std::vector<Vec3d> &reference);

Image apply_color_correction(const Image &image, const ColorAffine &affine);

// Patch files: one "r g b" triple per line, '#' starts a comment.
std::vector<Vec3d> read_patches(const std::filesystem::path &path);
void write_patches(const std::filesystem::path &path, const std::vector<Vec3d> &patches);

void save_color_affine(const std::filesystem::path &path, const ColorAffine &affine);
ColorAffine load_color_affine(const std::filesystem::path &path);

}  // namespace skinfit

#endif  // SKINFIT_COLOR_H
