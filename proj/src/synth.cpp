// SPDX-License-Identifier: Apache-2.0

#include <skinfit/synth.h>

#include <skinfit/error.h>
#include <skinfit/raster.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace fs = std::filesystem;

namespace skinfit {

namespace {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream `k` of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
    return splitmix64(seed ^ splitmix64(k + 0x51ed270b27f2a5b1ULL));
}

// Explicit conversion so sequences do not depend on the standard library.
double uniform01(Rng &rng) { return double(rng() >> 11) * 0x1.0p-53; }
double uniform(Rng &rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Lattice value noise on the unit square, periodic in both directions.
class ValueNoise {
  public:
    ValueNoise(int cells, Rng &rng) : cells_(cells), values_(std::size_t(cells) * cells) {
        for (double &v : values_) v = uniform01(rng);
    }

    double operator()(double u, double v) const {
        const double x = u * cells_, y = v * cells_;
        const double fx = std::floor(x), fy = std::floor(y);
        const int i0 = wrap(int(fx)), j0 = wrap(int(fy));
        const int i1 = wrap(i0 + 1), j1 = wrap(j0 + 1);
        const double sx = smooth(x - fx), sy = smooth(y - fy);
        const double a = lerp(at(i0, j0), at(i1, j0), sx);
        const double b = lerp(at(i0, j1), at(i1, j1), sx);
        return lerp(a, b, sy);
    }

  private:
    static double smooth(double t) { return t * t * (3 - 2 * t); }
    static double lerp(double a, double b, double t) { return a + (b - a) * t; }
    int wrap(int i) const { return ((i % cells_) + cells_) % cells_; }
    double at(int i, int j) const { return values_[std::size_t(j) * cells_ + i]; }

    int cells_;
    std::vector<double> values_;
};

// Weighted octaves with weights summing to 1, so the result stays in [0, 1].
class Fbm {
  public:
    Fbm(Rng &rng, std::initializer_list<std::pair<int, double>> octaves) {
        for (auto [cells, w] : octaves) {
            layers_.emplace_back(cells, rng);
            weights_.push_back(w);
        }
    }
    double operator()(double u, double v) const {
        double s = 0;
        for (std::size_t k = 0; k < layers_.size(); ++k) s += weights_[k] * layers_[k](u, v);
        return s;
    }

  private:
    std::vector<ValueNoise> layers_;
    std::vector<double> weights_;
};

void finish_mesh(TriMesh &mesh) {
    normalize_unit_scale(mesh);
    compute_tangent_frames(mesh);
    mesh.validate();
}

// Shared UV-sphere topology; `radius_at` scales each unit direction.
template <typename RadiusFn>
TriMesh sphere_like(int subdivisions, RadiusFn radius_at) {
    if (subdivisions < 1) throw ConfigError("sphere subdivisions must be at least 1");
    const int stacks = subdivisions + 1, slices = 2 * stacks;
    TriMesh m;
    auto direction = [](double u, double v) {
        const double phi = 2 * kPi * u, theta = kPi * v;
        return Vec3d{-std::sin(theta) * std::sin(phi), -std::cos(theta),
                     -std::sin(theta) * std::cos(phi)};
    };
    auto add = [&](double u, double v, std::uint32_t id) {
        const Vec3d d = direction(u, v);
        m.positions.push_back(d * radius_at(d));
        m.normals.push_back(d);
        m.uvs.push_back({u, v});
        m.position_id.push_back(id);
        return std::uint32_t(m.positions.size() - 1);
    };

    // Position ids: south pole 0, rings 1.., north pole last.
    std::vector<std::uint32_t> south(slices), north(slices);
    std::vector<std::vector<std::uint32_t>> ring(stacks + 1);
    for (int s = 0; s < slices; ++s) south[s] = add((s + 0.5) / slices, 0.0, 0);
    for (int k = 1; k < stacks; ++k) {
        ring[k].resize(slices + 1);
        for (int s = 0; s <= slices; ++s)
            ring[k][s] = add(double(s) / slices, double(k) / stacks,
                             std::uint32_t(1 + (k - 1) * slices + (s % slices)));
    }
    const auto north_id = std::uint32_t(1 + (stacks - 1) * slices);
    for (int s = 0; s < slices; ++s) north[s] = add((s + 0.5) / slices, 1.0, north_id);

    for (int s = 0; s < slices; ++s) {
        m.triangles.push_back({south[s], ring[1][s + 1], ring[1][s]});
        for (int k = 1; k + 1 < stacks; ++k) {
            const auto a = ring[k][s], b = ring[k][s + 1], c = ring[k + 1][s + 1],
                       d = ring[k + 1][s];
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
        }
        m.triangles.push_back({ring[stacks - 1][s], ring[stacks - 1][s + 1], north[s]});
    }
    return m;
}

}  // namespace

TriMesh make_sphere(int subdivisions) {
    TriMesh m = sphere_like(subdivisions, [](const Vec3d &) { return 1.0; });
    finish_mesh(m);
    return m;
}

TriMesh make_blob(int subdivisions, double amplitude, std::uint64_t seed) {
    if (!(amplitude >= 0 && amplitude < 0.5)) throw ConfigError("blob amplitude must be in [0, 0.5)");
    Rng rng(derive_seed(seed, 11));
    struct Wave {
        Vec3d k;
        double phase;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 6; ++i) {
        const Vec3d dir = normalize(Vec3d{uniform(rng, -1, 1), uniform(rng, -1, 1),
                                          uniform(rng, -1, 1)});
        waves.push_back({dir * uniform(rng, 1.5, 3.5), uniform(rng, 0, 2 * kPi)});
    }
    TriMesh m = sphere_like(subdivisions, [&](const Vec3d &d) {
        double f = 0;
        for (const Wave &w : waves) f += std::sin(dot(w.k, d) + w.phase);
        return 1.0 + amplitude * f / double(waves.size());
    });
    compute_vertex_normals(m);
    finish_mesh(m);
    return m;
}

TriMesh make_plane(int segments) {
    if (segments < 1) throw ConfigError("plane segments must be at least 1");
    TriMesh m;
    const int n = segments + 1;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double u = double(i) / segments, v = double(j) / segments;
            m.positions.push_back({u - 0.5, v - 0.5, 0.0});
            m.uvs.push_back({u, v});
            m.normals.push_back({0, 0, 1});
            m.position_id.push_back(std::uint32_t(m.position_id.size()));
        }
    for (int j = 0; j < segments; ++j)
        for (int i = 0; i < segments; ++i) {
            const auto a = std::uint32_t(j * n + i), b = a + 1, c = a + 1 + std::uint32_t(n),
                       d = a + std::uint32_t(n);
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
        }
    finish_mesh(m);
    return m;
}

TextureSet make_gt_textures(int resolution, std::uint64_t seed, const GtTextureOptions &options) {
    if (!is_power_of_two(resolution)) throw ConfigError("texture resolution must be a power of two");
    TextureSet t = TextureSet::make(resolution);
    Rng rng(derive_seed(seed, 1));

    const Fbm base(rng, {{4, 0.4}, {8, 0.3}, {16, 0.2}, {32, 0.1}});
    std::vector<Fbm> tint;
    for (int c = 0; c < 3; ++c) tint.emplace_back(rng, std::initializer_list<std::pair<int, double>>{
                                                           {4, 0.5}, {8, 0.3}, {16, 0.2}});
    const Fbm bump_x(rng, {{4, 0.5}, {8, 0.3}, {16, 0.2}});
    const Fbm bump_y(rng, {{4, 0.5}, {8, 0.3}, {16, 0.2}});

    struct Blob {
        double u, v, sigma, amp;
    };
    std::vector<Blob> blobs;
    for (int b = 0; b < options.blob_count; ++b)
        blobs.push_back({uniform01(rng), uniform(rng, 0.1, 0.9), uniform(rng, 0.015, 0.04),
                         uniform(rng, 0.25, 0.5)});
    t.alpha = uniform(rng, 0.2, 0.8);
    t.diffuse_scale = options.diffuse_scale;

    for (int j = 0; j < resolution; ++j)
        for (int i = 0; i < resolution; ++i) {
            const double u = (i + 0.5) / resolution, v = (j + 0.5) / resolution;
            const double b = base(u, v);
            for (int c = 0; c < 3; ++c) t.kd.at(i, j, c) = 0.1 + 0.8 * (0.7 * b + 0.3 * tint[c](u, v));

            if (options.specular) {
                double ks = 0;
                for (const Blob &bl : blobs) {
                    double du = std::abs(u - bl.u);
                    du = std::min(du, 1 - du) * 2;  // u spans twice the arc length of v
                    const double dv = v - bl.v;
                    ks += bl.amp * std::exp(-(du * du + dv * dv) / (2 * bl.sigma * bl.sigma));
                }
                t.ks.at(i, j, 0) = std::min(0.5, ks);
            }

            if (options.normal_bumps) {
                const double a = options.normal_amplitude;
                const Vec3d n = normalize(Vec3d{a * (2 * bump_x(u, v) - 1),
                                                a * (2 * bump_y(u, v) - 1), 1.0});
                for (int c = 0; c < 3; ++c) t.normal.at(i, j, c) = n[c];
            }
        }
    t.validate();
    return t;
}

std::vector<Camera> make_orbit(int n_views, double radius, std::uint64_t jitter_seed,
                               const OrbitOptions &options) {
    if (n_views < 1) throw ConfigError("orbit needs at least one view");
    if (!(radius > 0.5)) throw ConfigError("orbit radius must exceed the unit-scaled object");
    if (!(options.cap_deg > 0 && options.cap_deg <= 180))
        throw ConfigError("orbit cap half-angle must be in (0, 180] degrees");
    Rng rng(derive_seed(jitter_seed, 2));
    const double cos_cap = std::cos(options.cap_deg * kPi / 180);
    const double golden = kPi * (3 - std::sqrt(5.0));
    const double jitter = std::tan(options.jitter_deg * kPi / 180);
    std::vector<Camera> cams;
    for (int i = 0; i < n_views; ++i) {
        const double t = n_views == 1 ? 0.0 : double(i) / (n_views - 1);
        const double ct = 1 - (1 - cos_cap) * t;
        const double st = std::sqrt(std::max(0.0, 1 - ct * ct));
        const double phi = golden * i;
        Vec3d d{st * std::cos(phi), st * std::sin(phi), ct};
        if (jitter > 0) {
            const Vec3d e1 = any_orthonormal(d), e2 = cross(d, e1);
            const double a = uniform(rng, -1, 1), b = uniform(rng, -1, 1);
            d = normalize(d + (e1 * a + e2 * b) * jitter);
        }
        cams.push_back(Camera::look_at(d * radius, {0, 0, 0}, {0, 1, 0}, options.fx, options.fx,
                                       options.width, options.height));
    }
    return cams;
}

AttenuationMap make_vignette(const Camera &camera) {
    AttenuationMap m(camera.width, camera.height, 1);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            const double dx = (x + 0.5 - camera.cx) / camera.fx,
                         dy = (y + 0.5 - camera.cy) / camera.fy;
            const double c2 = 1.0 / (1 + dx * dx + dy * dy);
            m.at(x, y, 0) = float(c2 * c2);
        }
    return m;
}

SynthScene make_scene(const SynthConfig &config) {
    SynthScene scene;
    scene.sigma = config.sigma;
    scene.light_intensity = config.light_intensity;
    scene.noise_seed = derive_seed(config.seed, 3);
    scene.render_parallel = config.render_parallel;
    if (!(config.sigma >= 0)) throw ConfigError("noise sigma must be non-negative");

    OrbitOptions orbit = config.orbit;
    orbit.jitter_deg = config.jitter_deg;

    if (config.shape == "plane") {
        scene.mesh = make_plane(std::max(1, config.subdivisions / 8));
        GtTextureOptions topt = config.textures;
        topt.specular = false;
        topt.normal_bumps = false;
        scene.ground_truth = make_gt_textures(config.texture_resolution, config.seed, topt);
        scene.render_parallel = false;
        Rng rng(derive_seed(config.seed, 4));
        for (int i = 0; i < config.views; ++i) {
            const Vec3d eye{uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06),
                            config.radius * uniform(rng, 0.92, 1.08)};
            const Vec3d target{uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04), 0.0};
            scene.cameras.push_back(Camera::look_at(eye, target, {0, 1, 0}, orbit.fx, orbit.fx,
                                                    orbit.width, orbit.height));
        }
    } else {
        if (config.shape == "sphere")
            scene.mesh = make_sphere(config.subdivisions);
        else if (config.shape == "blob")
            scene.mesh = make_blob(config.subdivisions, config.blob_amplitude, config.seed);
        else
            throw ConfigError("unknown shape '" + config.shape + "'");
        scene.ground_truth =
            make_gt_textures(config.texture_resolution, config.seed, config.textures);
        scene.cameras = make_orbit(config.views, config.radius, config.seed, orbit);
    }
    if (config.vignette) scene.attenuation = make_vignette(scene.cameras.front());
    return scene;
}

namespace {

std::string view_id(const char *prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, i);
    return buf;
}

void add_noise(Image &img, double sigma, std::uint64_t seed) {
    if (sigma <= 0) return;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (float &v : img.data()) v = float(std::max(0.0, double(v) + normal(rng)));
}

}  // namespace

Dataset render_dataset(const SynthScene &scene, int workers) {
    Dataset ds;
    ds.mesh = scene.mesh;
    ds.attenuation = scene.attenuation;
    ds.light_intensity = scene.light_intensity;
    std::vector<CaptureView> parallel;
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        const Camera &cam = scene.cameras[i];
        const GBuffer gb = rasterize(scene.mesh, cam, workers);
        const AttenuationMap att = attenuation_or_ones(scene.attenuation, cam.width, cam.height);
        const PointLight light{cam.center(), scene.light_intensity};

        CaptureView cross{view_id("cross", i),
                          shade(gb, scene.ground_truth, light, att, Polarization::Cross, workers),
                          cam, Polarization::Cross, ViewRole::Train};
        add_noise(cross.image, scene.sigma, derive_seed(scene.noise_seed, 2 * i));
        ds.views.push_back(std::move(cross));
        if (scene.render_parallel) {
            CaptureView par{view_id("parallel", i),
                            shade(gb, scene.ground_truth, light, att, Polarization::Parallel,
                                  workers),
                            cam, Polarization::Parallel, ViewRole::Train};
            add_noise(par.image, scene.sigma, derive_seed(scene.noise_seed, 2 * i + 1));
            parallel.push_back(std::move(par));
        }
    }
    for (auto &v : parallel) ds.views.push_back(std::move(v));
    assign_default_roles(ds.views);
    return ds;
}

void write_synth(const fs::path &dir, const SynthScene &scene, const Dataset &dataset) {
    fs::create_directories(dir / "ground_truth");
    scene.ground_truth.save(dir / "ground_truth");
    if (!scene.attenuation.empty()) {
        write_pfm(dir / "ground_truth" / "attenuation.pfm", scene.attenuation);
        write_png(dir / "ground_truth" / "attenuation.png", scene.attenuation);
    }
    write_dataset(dir, dataset, fs::path("ground_truth"));
}

GradCheckScene make_gradcheck_scene(std::uint64_t seed, int views) {
    if (views < 1) throw ConfigError("gradient check needs at least one camera");
    const int res = 32;
    SynthConfig cfg;
    cfg.subdivisions = 15;
    cfg.texture_resolution = res;
    cfg.views = views;
    cfg.seed = seed;
    cfg.orbit.cap_deg = 60;
    cfg.orbit.fx = 200;
    cfg.orbit.width = cfg.orbit.height = 64;
    cfg.jitter_deg = 3;
    cfg.sigma = 0;
    cfg.vignette = true;
    const SynthScene scene = make_scene(cfg);

    // Evaluate away from the ground truth so residuals are nonzero and every
    // class has a gradient; ka is lifted off zero.
    TextureSet eval = scene.ground_truth;
    Rng rng(derive_seed(seed, 5));
    for (double &v : eval.kd.data()) v = std::max(0.05, v + uniform(rng, -0.1, 0.1));
    for (double &v : eval.ks.data()) v += uniform(rng, 0.05, 0.15);
    for (double &v : eval.ka.data()) v = uniform(rng, 0.02, 0.08);
    for (double &v : eval.normal.data()) v += uniform(rng, -0.1, 0.1);
    eval.alpha = std::clamp(scene.ground_truth.alpha + 0.15, 0.05, 0.95);
    eval.diffuse_scale = {1.05, 0.97, 1.02};

    const Dataset ds = render_dataset(scene, 1);
    GradCheckScene out;
    out.textures = eval;
    out.intensity = scene.light_intensity;
    for (const CaptureView &v : ds.views) {
        const GBuffer gb = rasterize(ds.mesh, v.camera, 1);
        FitView fv = prepare_view(gb, v.image, attenuation_or_ones(ds.attenuation, 64, 64),
                                  v.polarization);
        out.weights.push_back(compute_weights(fv, eval, {WeightScheme::MipCosine, res}));
        out.views.push_back(std::move(fv));
    }
    return out;
}

}  // namespace skinfit
