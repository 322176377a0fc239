// SPDX-License-Identifier: Apache-2.0

#include <skinfit/sharpness.h>

#include <skinfit/error.h>

#include <algorithm>

namespace skinfit {

Image luminance(const Image &image) {
    if (image.channels() == 1) return image;
    Image out(image.width(), image.height(), 1);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            out.at(x, y, 0) = 0.2126f * image.at(x, y, 0) + 0.7152f * image.at(x, y, 1) +
                              0.0722f * image.at(x, y, 2);
    return out;
}

double sharpness(const Image &image) {
    if (image.width() < 3 || image.height() < 3)
        throw DataError("sharpness needs an image of at least 3x3 pixels");
    const Image lum = luminance(image);
    const int w = lum.width(), h = lum.height();
    auto px = [&](int x, int y) {
        return double(lum.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1), 0));
    };
    std::vector<double> response;
    response.reserve(std::size_t(w) * h);
    double sum = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double r = 4 * px(x, y) - px(x - 1, y) - px(x + 1, y) - px(x, y - 1) - px(x, y + 1);
            response.push_back(r);
            sum += r;
        }
    const double mean = sum / double(response.size());
    double var = 0;
    for (double r : response) var += (r - mean) * (r - mean);
    return var / double(response.size());
}

std::vector<std::size_t> select_sharpest(const std::vector<double> &frame_sharpness,
                                         std::size_t window) {
    if (frame_sharpness.empty()) throw DataError("frame selection needs at least one frame");
    if (window < 1) throw ConfigError("frame selection window must be at least 1");
    std::vector<std::size_t> picks;
    for (std::size_t start = 0; start < frame_sharpness.size(); start += window) {
        const std::size_t end = std::min(frame_sharpness.size(), start + window);
        std::size_t best = start;
        for (std::size_t i = start + 1; i < end; ++i)
            if (frame_sharpness[i] > frame_sharpness[best]) best = i;
        picks.push_back(best);
    }
    return picks;
}

std::vector<std::size_t> select_sharpest(const std::vector<Image> &frames, std::size_t window) {
    std::vector<double> s;
    s.reserve(frames.size());
    for (const Image &f : frames) s.push_back(sharpness(f));
    return select_sharpest(s, window);
}

}  // namespace skinfit
