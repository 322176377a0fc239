// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_IMAGE_H
#define SKINFIT_IMAGE_H

#include <skinfit/vecmath.h>

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace skinfit {

// Camera-space raster. Row 0 is the top scanline; values are linear.
class Image {
  public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.f);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return std::size_t(width_) * height_; }
    bool empty() const { return data_.empty(); }

    float &at(int x, int y, int c) { return data_[(std::size_t(y) * width_ + x) * channels_ + c]; }
    float at(int x, int y, int c) const {
        return data_[(std::size_t(y) * width_ + x) * channels_ + c];
    }
    // Channel c of pixel p; single-channel images broadcast to any c.
    float channel(std::size_t p, int c) const {
        return data_[p * channels_ + (channels_ == 1 ? 0 : c)];
    }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    bool same_shape(const Image &o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }
    bool all_finite() const;

  private:
    int width_ = 0, height_ = 0, channels_ = 0;
    std::vector<float> data_;
};

// Square texture, power-of-two side. Row 0 is v in [0, 1/R]; texel (i, j) is
// centered at ((i + 0.5) / R, (j + 0.5) / R).
class Texture {
  public:
    Texture() = default;
    Texture(int resolution, int channels, double fill = 0.0);

    int resolution() const { return resolution_; }
    int channels() const { return channels_; }
    std::size_t texel_count() const { return std::size_t(resolution_) * resolution_; }
    bool empty() const { return data_.empty(); }

    double &at(int i, int j, int c) {
        return data_[(std::size_t(j) * resolution_ + i) * channels_ + c];
    }
    double at(int i, int j, int c) const {
        return data_[(std::size_t(j) * resolution_ + i) * channels_ + c];
    }
    double &operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Texture &o) const {
        return resolution_ == o.resolution_ && channels_ == o.channels_;
    }
    bool all_finite() const;
    double mean(int c) const;

  private:
    int resolution_ = 0, channels_ = 0;
    std::vector<double> data_;
};

bool is_power_of_two(int n);

// The four texels and weights a bilinear lookup touches at a given uv.
// Indices are texel indices (j * R + i), already clamped to the edge.
struct BilinearFootprint {
    std::array<int, 4> texel{};
    std::array<double, 4> weight{};

    BilinearFootprint() = default;
    BilinearFootprint(int resolution, double u, double v);
};

// Per-channel value; only the first texture.channels() entries are meaningful.
using TexelValue = std::array<double, 3>;

TexelValue bilinear_sample(const Texture &texture, Vec2d uv);
TexelValue bilinear_sample(const Texture &texture, const BilinearFootprint &fp);

// Adjoint of bilinear_sample: grad[texel] += weight * value for each channel.
void bilinear_splat(Texture &grad, Vec2d uv, const TexelValue &value);
void bilinear_splat(Texture &grad, const BilinearFootprint &fp, const TexelValue &value);

// Level 0 is the input, each further level a 2x2 box filter, ending at 1x1.
std::vector<Texture> build_mip_chain(const Texture &texture);

// Resample to the given power-of-two resolution: box-filter mips when
// shrinking, bilinear lookups at the new texel centers when growing.
Texture resample(const Texture &texture, int resolution);
Texture upsample2x(const Texture &texture);

// PFM: little-endian, scale -1, rows stored bottom to top.
Image read_pfm(const std::filesystem::path &path);
void write_pfm(const std::filesystem::path &path, const Image &image);
Texture read_pfm_texture(const std::filesystem::path &path);
void write_pfm(const std::filesystem::path &path, const Texture &texture);

// 8-bit preview: clamp to [0, 1], sRGB transfer curve.
float srgb_encode(float linear);
void write_png(const std::filesystem::path &path, const Image &image);
void write_png(const std::filesystem::path &path, const Texture &texture);

// Texture rows flipped so the preview reads with v pointing up.
Image texture_to_image(const Texture &texture);

}  // namespace skinfit

#endif  // SKINFIT_IMAGE_H
