// SPDX-License-Identifier: Apache-2.0

#include <skinfit/image.h>

#include <skinfit/error.h>

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace skinfit {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1) throw DataError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw DataError("image must have 1 or 3 channels");
    data_.assign(std::size_t(width) * height * channels, fill);
}

bool Image::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Texture::Texture(int resolution, int channels, double fill)
    : resolution_(resolution), channels_(channels) {
    if (!is_power_of_two(resolution))
        throw DataError("texture resolution " + std::to_string(resolution) +
                        " is not a power of two");
    if (channels != 1 && channels != 3) throw DataError("texture must have 1 or 3 channels");
    data_.assign(std::size_t(resolution) * resolution * channels, fill);
}

bool Texture::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Texture::mean(int c) const {
    double s = 0;
    for (std::size_t k = 0; k < texel_count(); ++k) s += data_[k * channels_ + c];
    return s / double(texel_count());
}

bool is_power_of_two(int n) {
    return n >= 1 && std::has_single_bit(static_cast<unsigned>(n));
}

BilinearFootprint::BilinearFootprint(int resolution, double u, double v) {
    u = std::clamp(u, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    const double x = u * resolution - 0.5;
    const double y = v * resolution - 0.5;
    const double x0 = std::floor(x), y0 = std::floor(y);
    const double fx = x - x0, fy = y - y0;
    const int last = resolution - 1;
    const int i0 = std::clamp(int(x0), 0, last), i1 = std::clamp(int(x0) + 1, 0, last);
    const int j0 = std::clamp(int(y0), 0, last), j1 = std::clamp(int(y0) + 1, 0, last);
    texel = {j0 * resolution + i0, j0 * resolution + i1, j1 * resolution + i0,
             j1 * resolution + i1};
    weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
}

TexelValue bilinear_sample(const Texture &texture, const BilinearFootprint &fp) {
    TexelValue out{0, 0, 0};
    const int nc = texture.channels();
    const auto data = texture.data();
    for (int k = 0; k < 4; ++k) {
        const std::size_t base = std::size_t(fp.texel[k]) * nc;
        for (int c = 0; c < nc; ++c) out[c] += fp.weight[k] * data[base + c];
    }
    return out;
}

TexelValue bilinear_sample(const Texture &texture, Vec2d uv) {
    return bilinear_sample(texture, BilinearFootprint(texture.resolution(), uv.x, uv.y));
}

void bilinear_splat(Texture &grad, const BilinearFootprint &fp, const TexelValue &value) {
    const int nc = grad.channels();
    auto data = grad.data();
    for (int k = 0; k < 4; ++k) {
        const std::size_t base = std::size_t(fp.texel[k]) * nc;
        for (int c = 0; c < nc; ++c) data[base + c] += fp.weight[k] * value[c];
    }
}

void bilinear_splat(Texture &grad, Vec2d uv, const TexelValue &value) {
    bilinear_splat(grad, BilinearFootprint(grad.resolution(), uv.x, uv.y), value);
}

std::vector<Texture> build_mip_chain(const Texture &texture) {
    if (!is_power_of_two(texture.resolution()))
        throw DataError("mip chain requires a power-of-two texture");
    std::vector<Texture> chain{texture};
    while (chain.back().resolution() > 1) {
        const Texture &src = chain.back();
        const int r = src.resolution() / 2, nc = src.channels();
        Texture dst(r, nc);
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i)
                for (int c = 0; c < nc; ++c)
                    dst.at(i, j, c) = 0.25 * (src.at(2 * i, 2 * j, c) + src.at(2 * i + 1, 2 * j, c) +
                                              src.at(2 * i, 2 * j + 1, c) +
                                              src.at(2 * i + 1, 2 * j + 1, c));
        chain.push_back(std::move(dst));
    }
    return chain;
}

Texture upsample2x(const Texture &texture) {
    const int r = texture.resolution() * 2, nc = texture.channels();
    Texture out(r, nc);
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i) {
            const TexelValue v = bilinear_sample(texture, {(i + 0.5) / r, (j + 0.5) / r});
            for (int c = 0; c < nc; ++c) out.at(i, j, c) = v[c];
        }
    return out;
}

Texture resample(const Texture &texture, int resolution) {
    if (!is_power_of_two(resolution)) throw DataError("target resolution must be a power of two");
    if (resolution == texture.resolution()) return texture;
    if (resolution < texture.resolution()) {
        auto chain = build_mip_chain(texture);
        for (auto &level : chain)
            if (level.resolution() == resolution) return std::move(level);
    }
    Texture out = texture;
    while (out.resolution() < resolution) out = upsample2x(out);
    return out;
}

// --- PFM ------------------------------------------------------------------

namespace {

struct PfmData {
    int width = 0, height = 0, channels = 0;
    std::vector<float> rows_bottom_up;
};

PfmData read_pfm_raw(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    PfmData pfm;
    if (magic == "PF")
        pfm.channels = 3;
    else if (magic == "Pf")
        pfm.channels = 1;
    else
        throw DataError(path.string() + ": not a PFM file");
    double scale = 0;
    in >> pfm.width >> pfm.height >> scale;
    if (!in || pfm.width < 1 || pfm.height < 1) throw DataError(path.string() + ": bad PFM header");
    in.get();  // single whitespace byte before the raster
    const bool little = scale < 0;
    const std::size_t n = std::size_t(pfm.width) * pfm.height * pfm.channels;
    pfm.rows_bottom_up.resize(n);
    in.read(reinterpret_cast<char *>(pfm.rows_bottom_up.data()), std::streamsize(n * 4));
    if (!in) throw DataError(path.string() + ": truncated PFM raster");
    if (little != (std::endian::native == std::endian::little)) {
        for (float &f : pfm.rows_bottom_up) {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&f, &u, 4);
        }
    }
    for (float f : pfm.rows_bottom_up)
        if (!std::isfinite(f)) throw DataError(path.string() + ": non-finite value in PFM");
    return pfm;
}

void write_pfm_raw(const std::filesystem::path &path, int width, int height, int channels,
                   const std::vector<float> &rows_bottom_up) {
    static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << (channels == 3 ? "PF" : "Pf") << '\n' << width << ' ' << height << '\n' << "-1.0\n";
    out.write(reinterpret_cast<const char *>(rows_bottom_up.data()),
              std::streamsize(rows_bottom_up.size() * 4));
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

Image read_pfm(const std::filesystem::path &path) {
    PfmData pfm = read_pfm_raw(path);
    Image img(pfm.width, pfm.height, pfm.channels);
    const std::size_t row = std::size_t(pfm.width) * pfm.channels;
    auto dst = img.data();
    for (int y = 0; y < pfm.height; ++y)
        std::copy_n(pfm.rows_bottom_up.begin() + std::ptrdiff_t((pfm.height - 1 - y) * row), row,
                    dst.begin() + std::ptrdiff_t(y * row));
    return img;
}

void write_pfm(const std::filesystem::path &path, const Image &image) {
    const std::size_t row = std::size_t(image.width()) * image.channels();
    std::vector<float> buf(row * image.height());
    auto src = image.data();
    for (int y = 0; y < image.height(); ++y)
        std::copy_n(src.begin() + std::ptrdiff_t((image.height() - 1 - y) * row), row,
                    buf.begin() + std::ptrdiff_t(y * row));
    write_pfm_raw(path, image.width(), image.height(), image.channels(), buf);
}

Texture read_pfm_texture(const std::filesystem::path &path) {
    PfmData pfm = read_pfm_raw(path);
    if (pfm.width != pfm.height || !is_power_of_two(pfm.width))
        throw DataError(path.string() + ": texture must be square with power-of-two side");
    Texture tex(pfm.width, pfm.channels);
    std::copy(pfm.rows_bottom_up.begin(), pfm.rows_bottom_up.end(), tex.data().begin());
    return tex;
}

void write_pfm(const std::filesystem::path &path, const Texture &texture) {
    std::vector<float> buf(texture.data().begin(), texture.data().end());
    write_pfm_raw(path, texture.resolution(), texture.resolution(), texture.channels(), buf);
}

// --- PNG ------------------------------------------------------------------

float srgb_encode(float linear) {
    const float v = std::clamp(linear, 0.f, 1.f);
    return v <= 0.0031308f ? 12.92f * v : 1.055f * std::pow(v, 1.f / 2.4f) - 0.055f;
}

namespace {

void put_u32(std::string &s, std::uint32_t v) {
    s.push_back(char(v >> 24));
    s.push_back(char(v >> 16));
    s.push_back(char(v >> 8));
    s.push_back(char(v));
}

void put_chunk(std::ofstream &out, const char *type, const std::string &payload) {
    std::string chunk;
    put_u32(chunk, std::uint32_t(payload.size()));
    chunk.append(type, 4);
    chunk += payload;
    const auto *bytes = reinterpret_cast<const Bytef *>(chunk.data() + 4);
    const std::uint32_t crc = std::uint32_t(crc32(0, bytes, uInt(payload.size() + 4)));
    put_u32(chunk, crc);
    out.write(chunk.data(), std::streamsize(chunk.size()));
}

}  // namespace

void write_png(const std::filesystem::path &path, const Image &image) {
    const int w = image.width(), h = image.height(), nc = image.channels();
    std::string raw;
    raw.reserve(std::size_t(h) * (1 + std::size_t(w) * nc));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < nc; ++c)
                raw.push_back(char(std::lround(srgb_encode(image.at(x, y, c)) * 255.f)));
    }
    uLongf packed_size = compressBound(uLong(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef *>(packed.data()), &packed_size,
                  reinterpret_cast<const Bytef *>(raw.data()), uLong(raw.size()), 6) != Z_OK)
        throw DataError("zlib compression failed for " + path.string());
    packed.resize(packed_size);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32(ihdr, std::uint32_t(w));
    put_u32(ihdr, std::uint32_t(h));
    ihdr += char(8);                  // bit depth
    ihdr += char(nc == 3 ? 2 : 0);    // truecolor / grayscale
    ihdr += std::string(3, '\0');     // compression, filter, interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    if (!out) throw DataError("write failed: " + path.string());
}

Image texture_to_image(const Texture &texture) {
    const int r = texture.resolution(), nc = texture.channels();
    Image img(r, r, nc);
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i)
            for (int c = 0; c < nc; ++c) img.at(i, r - 1 - j, c) = float(texture.at(i, j, c));
    return img;
}

void write_png(const std::filesystem::path &path, const Texture &texture) {
    write_png(path, texture_to_image(texture));
}

}  // namespace skinfit
