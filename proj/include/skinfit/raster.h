// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_RASTER_H
#define SKINFIT_RASTER_H

#include <skinfit/brdf.h>
#include <skinfit/camera.h>
#include <skinfit/image.h>
#include <skinfit/mesh.h>
#include <skinfit/texture_set.h>

#include <cstdint>
#include <vector>

namespace skinfit {

// Per-pixel multiplier on rendered radiance, in camera image space.
using AttenuationMap = Image;

// The geometric attributes shading needs at one covered pixel. World-space
// unit vectors; `omega` points from the surface toward the camera.
struct ShadingSample {
    float u = 0, v = 0;
    Vec3f tangent, bitangent, normal;
    Vec3f omega;
    float dist = 0;
    // Larger of the two uv-space screen-derivative lengths; the texel
    // footprint of the pixel at resolution R is footprint * R.
    float footprint = 0;
};

struct GPixel {
    bool covered = false;
    std::int32_t triangle = -1;
    float depth = 0;  // camera-space z
    ShadingSample sample;
    Vec3f face_normal;
    float dudx = 0, dvdx = 0, dudy = 0, dvdy = 0;

    double cosv_geo() const { return dot(Vec3d(sample.normal), Vec3d(sample.omega)); }
};

struct GBuffer {
    int width = 0, height = 0;
    std::vector<GPixel> pixels;

    const GPixel &at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
    std::size_t covered_count() const;
};

// Covered pixels only, in scanline order.
struct SampleBuffer {
    int width = 0, height = 0;
    std::vector<std::uint32_t> pixel;
    std::vector<ShadingSample> samples;

    std::size_t size() const { return samples.size(); }
};

SampleBuffer compact(const GBuffer &gbuffer);

// Z-buffered, back-face culled rasterization with perspective-correct
// attribute interpolation, sampled at pixel centers.
GBuffer rasterize(const TriMesh &mesh, const Camera &camera, int workers = 1);

// normalize(nx t + ny b + nz n); falls back to n when the result has zero
// length. Returns the unnormalized vector through `unnormalized` if given.
Vec3d decode_normal(const ShadingSample &s, const TexelValue &texel,
                    Vec3d *unnormalized = nullptr);
// Shading normals for every pixel; zero vectors on uncovered pixels.
std::vector<Vec3d> apply_normal_map(const GBuffer &gbuffer, const Texture &normal_texture);

// log2(footprint * R), clamped below at 0.
double mip_level(double footprint, int resolution);
double mip_level(const GPixel &pixel, int resolution);
// cosv (1 - l) when l < 1, else 0.
double pixel_weight(double cosv, double level);

// Bilinear footprints of one uv for each map of a texture set (maps may
// differ in resolution).
struct SampleFootprints {
    BilinearFootprint kd, ks, ka, normal;
    SampleFootprints(const TextureSet &t, double u, double v);
};

// Forward evaluation of one covered pixel, keeping the intermediates the
// backward pass needs.
struct SampleEval {
    Vec3d rendered;           // M * L
    Vec3d attenuation;        // M
    brdf::ShadingInputs inputs;
    Vec3d kd_texel;           // kd before the diffuse scale
    Vec3d shading_normal;
    Vec3d unnormalized_normal;
    double raw_cos = 0;       // shading normal . omega before clamping
    bool normal_fallback = false;
};

SampleEval evaluate_sample(const ShadingSample &s, const SampleFootprints &fp,
                           const TextureSet &textures, const Vec3d &intensity,
                           const Vec3d &attenuation, Polarization mode,
                           brdf::BrdfDerivatives *derivs = nullptr);

// Renders M * L for every covered pixel; zero elsewhere.
Image shade(const GBuffer &gbuffer, const TextureSet &textures, const PointLight &light,
            const AttenuationMap &attenuation, Polarization mode, int workers = 1);
Image shade(const SampleBuffer &samples, const TextureSet &textures, const PointLight &light,
            const AttenuationMap &attenuation, Polarization mode, int workers = 1);

}  // namespace skinfit

#endif  // SKINFIT_RASTER_H
