// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_SHARPNESS_H
#define SKINFIT_SHARPNESS_H

#include <skinfit/image.h>

#include <cstddef>
#include <vector>

namespace skinfit {

// Rec. 709 luminance of an RGB image; single-channel images pass through.
Image luminance(const Image &image);

// Population variance of the 3x3 Laplacian (center 4, cross -1) of the
// luminance, replicate-border addressing. Requires at least 3x3 pixels.
double sharpness(const Image &image);

// One pick per consecutive window of `window` frames (the last may be
// short): the index of the sharpest frame, lowest index on ties.
std::vector<std::size_t> select_sharpest(const std::vector<double> &frame_sharpness,
                                         std::size_t window = 10);
std::vector<std::size_t> select_sharpest(const std::vector<Image> &frames,
                                         std::size_t window = 10);

}  // namespace skinfit

#endif  // SKINFIT_SHARPNESS_H
