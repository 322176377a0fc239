// SPDX-License-Identifier: Apache-2.0

#include <skinfit/metrics.h>

#include <skinfit/error.h>

#include <algorithm>
#include <cmath>

namespace skinfit {

namespace {

double psnr_from_mse(double mse) {
    if (!(mse > 0)) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

// Separable blur of a single plane with a normalized, border-truncated kernel.
std::vector<double> blur(const std::vector<double> &src, int w, int h,
                         const std::vector<double> &kernel) {
    const int r = int(kernel.size() / 2);
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0, ws = 0;
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                s += kernel[k + r] * src[std::size_t(y) * w + xx];
                ws += kernel[k + r];
            }
            tmp[std::size_t(y) * w + x] = s / ws;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0, ws = 0;
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                s += kernel[k + r] * tmp[std::size_t(yy) * w + x];
                ws += kernel[k + r];
            }
            out[std::size_t(y) * w + x] = s / ws;
        }
    return out;
}

void check_image_inputs(const Image &a, const Image &b, const Mask &mask) {
    if (!a.same_shape(b)) throw DataError("metric inputs differ in shape");
    if (mask.size() != a.pixel_count()) throw DataError("mask size does not match the image");
}

}  // namespace

double psnr(const Image &a, const Image &b, const Mask &mask) {
    check_image_inputs(a, b, mask);
    const int nc = a.channels();
    double se = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < nc; ++c) {
            const double d = double(a.channel(p, c)) - double(b.channel(p, c));
            se += d * d;
        }
        n += std::size_t(nc);
    }
    if (n == 0) throw DataError("PSNR over an empty mask");
    return psnr_from_mse(se / double(n));
}

double ssim(const Image &a, const Image &b, const Mask &mask) {
    check_image_inputs(a, b, mask);
    const int w = a.width(), h = a.height(), nc = a.channels();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    std::vector<double> kernel(11);
    for (int k = -5; k <= 5; ++k) kernel[k + 5] = std::exp(-0.5 * k * k / (1.5 * 1.5));

    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    if (n == 0) throw DataError("SSIM over an empty mask");

    double total = 0;
    const std::size_t np = a.pixel_count();
    for (int c = 0; c < nc; ++c) {
        std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
        for (std::size_t p = 0; p < np; ++p) {
            x[p] = mask[p] ? a.channel(p, c) : 0.0;
            y[p] = mask[p] ? b.channel(p, c) : 0.0;
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = blur(x, w, h, kernel), my = blur(y, w, h, kernel);
        const auto sxx = blur(xx, w, h, kernel), syy = blur(yy, w, h, kernel),
                   sxy = blur(xy, w, h, kernel);
        double sum = 0;
        for (std::size_t p = 0; p < np; ++p) {
            if (!mask[p]) continue;
            const double vx = sxx[p] - mx[p] * mx[p], vy = syy[p] - my[p] * my[p],
                         cov = sxy[p] - mx[p] * my[p];
            sum += ((2 * mx[p] * my[p] + c1) * (2 * cov + c2)) /
                   ((mx[p] * mx[p] + my[p] * my[p] + c1) * (vx + vy + c2));
        }
        total += sum / double(n);
    }
    return total / nc;
}

double texture_psnr(const Texture &a, const Texture &b, const Mask &mask) {
    if (!a.same_shape(b)) throw DataError("texture metric inputs differ in shape");
    if (mask.size() != a.texel_count()) throw DataError("mask size does not match the texture");
    const int nc = a.channels();
    double se = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (!mask[t]) continue;
        for (int c = 0; c < nc; ++c) {
            const double d = a[t * nc + c] - b[t * nc + c];
            se += d * d;
        }
        n += std::size_t(nc);
    }
    if (n == 0) throw DataError("texture PSNR over an empty mask");
    return psnr_from_mse(se / double(n));
}

double normal_angular_error_deg(const Texture &a, const Texture &b, const Mask &mask) {
    if (!a.same_shape(b) || a.channels() != 3)
        throw DataError("normal maps differ in shape or are not 3-channel");
    if (mask.size() != a.texel_count()) throw DataError("mask size does not match the texture");
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (!mask[t]) continue;
        const Vec3d na = normalize(Vec3d{a[3 * t], a[3 * t + 1], a[3 * t + 2]});
        const Vec3d nb = normalize(Vec3d{b[3 * t], b[3 * t + 1], b[3 * t + 2]});
        // atan2 keeps precision near 0 where acos does not.
        sum += std::atan2(length(cross(na, nb)), dot(na, nb));
        ++n;
    }
    if (n == 0) throw DataError("normal error over an empty mask");
    return sum / double(n) * 180.0 / kPi;
}

double mask_fraction(const Mask &mask) {
    if (mask.empty()) return 0;
    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return double(n) / double(mask.size());
}

}  // namespace skinfit
