// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_METRICS_H
#define SKINFIT_METRICS_H

#include <skinfit/image.h>

#include <cstdint>
#include <vector>

namespace skinfit {

// Pixel or texel mask; nonzero entries are included.
using Mask = std::vector<std::uint8_t>;

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over the masked pixels and all channels, peak 1.
// Identical inputs report kPsnrCap.
double psnr(const Image &a, const Image &b, const Mask &mask);

// Mean SSIM over masked pixels: 11x11 Gaussian window (sigma 1.5),
// C1 = 0.01^2, C2 = 0.03^2, computed per channel and averaged. Unmasked
// pixels are zeroed in both images; windows are truncated at the image
// border and renormalized.
double ssim(const Image &a, const Image &b, const Mask &mask);

double texture_psnr(const Texture &a, const Texture &b, const Mask &mask);

// Mean angle in degrees between the normalized texels of two normal maps.
double normal_angular_error_deg(const Texture &a, const Texture &b, const Mask &mask);

// Fraction of nonzero entries.
double mask_fraction(const Mask &mask);

}  // namespace skinfit

#endif  // SKINFIT_METRICS_H
