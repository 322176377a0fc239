// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_SYNTH_H
#define SKINFIT_SYNTH_H

#include <skinfit/dataset.h>
#include <skinfit/grad.h>
#include <skinfit/texture_set.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace skinfit {

// UV sphere, poles on +-y, u = 0.5 facing +z, v = 0 at the south pole.
// subdivisions + 1 stacks and twice as many slices. Pole vertices are
// duplicated per slice at the slice's mid-u so no pole triangle is
// degenerate in UV. Unit-scaled; normals are the normalized positions.
TriMesh make_sphere(int subdivisions);

// Sphere whose radius is modulated by a smooth random field of relative
// amplitude `amplitude`; normals are area-weighted face normals.
TriMesh make_blob(int subdivisions, double amplitude, std::uint64_t seed);

// Square in the z = 0 plane facing +z, uv = identity over the square, split
// into segments x segments quads. Unit-scaled (side 1/sqrt(2)).
TriMesh make_plane(int segments);

struct GtTextureOptions {
    std::array<double, 3> diffuse_scale{1, 1, 1};
    bool specular = true;      // false gives ks = 0
    bool normal_bumps = true;  // false gives flat normals
    int blob_count = 40;
    double normal_amplitude = 0.3;
};

// kd: smooth value noise in [0.1, 0.9]; ks: Gaussian blobs in [0, 0.5];
// normal: bump field with |x|, |y| <= amplitude before normalization;
// ka = 0; alpha drawn from [0.2, 0.8].
TextureSet make_gt_textures(int resolution, std::uint64_t seed,
                            const GtTextureOptions &options = {});

struct OrbitOptions {
    double cap_deg = 150;   // half-angle of the cap around +z
    double jitter_deg = 0;  // uniform direction jitter, per axis
    double fx = 1600;
    int width = 512, height = 512;
};

// Cameras on a spherical cap around +z at distance `radius`, looking at the
// origin with +y up. The first camera sits on +z; the rest follow a
// Fibonacci spiral toward the cap edge.
std::vector<Camera> make_orbit(int n_views, double radius, std::uint64_t jitter_seed,
                               const OrbitOptions &options = {});

// M = cos^4 of the angle between each pixel's ray and the optical axis.
AttenuationMap make_vignette(const Camera &camera);

struct SynthConfig {
    std::string shape = "sphere";  // sphere | blob | plane
    int subdivisions = 63;
    double blob_amplitude = 0.08;
    int texture_resolution = 256;
    int views = 48;
    double radius = 2.5;
    OrbitOptions orbit{};
    double jitter_deg = 3;
    double sigma = 0.002;
    bool vignette = false;
    Vec3d light_intensity{10, 10, 10};
    GtTextureOptions textures{};
    bool render_parallel = true;
    std::uint64_t seed = 0;
};

struct SynthScene {
    TriMesh mesh;
    TextureSet ground_truth;
    std::vector<Camera> cameras;
    AttenuationMap attenuation;  // empty means M = 1
    double sigma = 0;
    Vec3d light_intensity{10, 10, 10};
    bool render_parallel = true;
    std::uint64_t noise_seed = 0;
};

// Every random quantity derives from config.seed. Plane scenes place the
// cameras in front of the plane (lateral offsets and small tilts) instead
// of on an orbit.
SynthScene make_scene(const SynthConfig &config);

// cross_<i> and parallel_<i> per camera (parallel omitted when disabled),
// noise added with a per-view seed and clamped at 0. The highest-index view
// of each polarization is marked holdout.
Dataset render_dataset(const SynthScene &scene, int workers = 1);

// Dataset files plus ground_truth/ (texture set, and attenuation.pfm when
// the scene has one).
void write_synth(const std::filesystem::path &dir, const SynthScene &scene,
                 const Dataset &dataset);

// A small sphere scene for gradient checks: a cross and a parallel 64x64
// view per camera, 32^2 textures with every map perturbed away from the
// ground truth, and W fixed to the mip/cosine weights of those textures.
GradCheckScene make_gradcheck_scene(std::uint64_t seed, int views = 3);

}  // namespace skinfit

#endif  // SKINFIT_SYNTH_H
