// SPDX-License-Identifier: Apache-2.0

#include <skinfit/error.h>
#include <skinfit/raster.h>
#include <skinfit/synth.h>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace skinfit {
namespace {

// Builds a mesh from independent triangles (no shared vertices), with face
// normals, identity-like UVs and tangent frames.
TriMesh triangle_soup(const std::vector<std::array<Vec3d, 3>> &tris,
                      const std::vector<std::array<Vec2d, 3>> &uvs = {}) {
    TriMesh m;
    for (std::size_t i = 0; i < tris.size(); ++i) {
        const auto &t = tris[i];
        const std::uint32_t base = std::uint32_t(m.positions.size());
        const std::array<Vec2d, 3> uv =
            uvs.empty() ? std::array<Vec2d, 3>{Vec2d{0.1, 0.1}, Vec2d{0.9, 0.1}, Vec2d{0.1, 0.9}}
                        : uvs[i];
        for (int k = 0; k < 3; ++k) {
            m.positions.push_back(t[k]);
            m.uvs.push_back(uv[k]);
            m.position_id.push_back(base + std::uint32_t(k));
        }
        m.triangles.push_back({base, base + 1, base + 2});
    }
    compute_vertex_normals(m);
    compute_tangent_frames(m);
    return m;
}

// Axis-aligned square in the plane z = z0 facing +z, half-size h.
std::vector<std::array<Vec3d, 3>> square(double cx, double cy, double z0, double h) {
    const Vec3d a{cx - h, cy - h, z0}, b{cx + h, cy - h, z0}, c{cx + h, cy + h, z0},
        d{cx - h, cy + h, z0};
    return {{a, b, c}, {a, c, d}};
}

struct RayHit {
    bool hit = false;
    double depth = std::numeric_limits<double>::infinity();
};

// Brute-force oracle: cast the pixel-center ray against every front-facing
// triangle and keep the nearest hit (camera-space z).
RayHit cast(const TriMesh &mesh, const Camera &cam, int x, int y) {
    const Vec3d dir_cam{(x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0};
    const Vec3d dir = cam.rotation.transposed() * dir_cam;
    const Vec3d org = cam.center();
    RayHit best;
    for (const auto &t : mesh.triangles) {
        const Vec3d p0 = mesh.positions[t[0]], p1 = mesh.positions[t[1]], p2 = mesh.positions[t[2]];
        const Vec3d e1 = p1 - p0, e2 = p2 - p0;
        if (dot(cross(e1, e2), p0 - org) >= 0) continue;  // back-facing
        const Vec3d pv = cross(dir, e2);
        const double det = dot(e1, pv);
        if (std::abs(det) < 1e-15) continue;
        const Vec3d tv = org - p0;
        const double u = dot(tv, pv) / det;
        if (u < 0 || u > 1) continue;
        const Vec3d qv = cross(tv, e1);
        const double v = dot(dir, qv) / det;
        if (v < 0 || u + v > 1) continue;
        const double s = dot(e2, qv) / det;  // ray parameter; dir_cam.z = 1
        if (s > 0 && s < best.depth) best = {true, s};
    }
    return best;
}

void expect_matches_oracle(const TriMesh &mesh, const Camera &cam) {
    const GBuffer gb = rasterize(mesh, cam);
    std::size_t mismatched = 0, covered = 0;
    double worst_depth = 0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const RayHit h = cast(mesh, cam, x, y);
            const GPixel &g = gb.at(x, y);
            if (h.hit != g.covered) {
                ++mismatched;
                continue;
            }
            if (!h.hit) continue;
            ++covered;
            worst_depth = std::max(worst_depth, std::abs(double(g.depth) - h.depth) / h.depth);
        }
    EXPECT_EQ(mismatched, 0u);
    EXPECT_GT(covered, 0u);
    // Depth is stored as float; compare relative to the depth itself.
    EXPECT_LT(worst_depth, 1e-5);
}

TEST(Rasterize, FullScreenQuad) {
    const TriMesh m = triangle_soup(square(0, 0, 0, 1));
    const Camera cam = Camera::look_at({0, 0, 1}, {0, 0, 0}, {0, 1, 0}, 20, 20, 32, 32);
    const GBuffer gb = rasterize(m, cam);
    EXPECT_EQ(gb.covered_count(), gb.pixels.size());
    for (const GPixel &p : gb.pixels) {
        EXPECT_GE(p.triangle, 0);
        EXPECT_LT(p.triangle, 2);
    }
}

TEST(Rasterize, CenterPixelDistance) {
    const double d = 1.7;
    const TriMesh m = triangle_soup(square(0, 0, 0, 0.5));
    const Camera cam = Camera::look_at({0, 0, d}, {0, 0, 0}, {0, 1, 0}, 40, 40, 65, 65);
    const GBuffer gb = rasterize(m, cam);
    const GPixel &c = gb.at(32, 32);
    ASSERT_TRUE(c.covered);
    EXPECT_NEAR(c.sample.dist, d, 1e-6);
    EXPECT_NEAR(c.depth, d, 1e-6);
    EXPECT_NEAR(c.cosv_geo(), 1.0, 1e-6);
}

TEST(Rasterize, BackFacesCulled) {
    const TriMesh m = triangle_soup(square(0, 0, 0, 0.5));
    const Camera cam = Camera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 40, 40, 32, 32);
    EXPECT_EQ(rasterize(m, cam).covered_count(), 0u);
}

TEST(Rasterize, NearerQuadWins) {
    auto tris = square(0, 0, 0, 0.4);
    const auto front = square(0.15, 0.1, 0.3, 0.3);
    tris.insert(tris.end(), front.begin(), front.end());
    const TriMesh m = triangle_soup(tris);
    const Camera cam = Camera::look_at({0.05, -0.1, 2}, {0, 0, 0}, {0, 1, 0}, 80, 80, 64, 64);
    expect_matches_oracle(m, cam);
    // The pixel straight through the front quad's center belongs to it.
    const GBuffer gb = rasterize(m, cam);
    const Vec3d pc = cam.to_camera({0.15, 0.1, 0.3});
    const int x = int(cam.fx * pc.x / pc.z + cam.cx), y = int(cam.fy * pc.y / pc.z + cam.cy);
    EXPECT_GE(gb.at(x, y).triangle, 2);
}

TEST(Rasterize, MatchesOracleOnRandomScenes) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    // Random blob seen from a random direction.
    {
        const TriMesh m = make_blob(12, 0.1, 5);
        const Vec3d eye = normalize(Vec3d{u(rng), u(rng), u(rng)}) * 1.5;
        expect_matches_oracle(m, Camera::look_at(eye, {0, 0, 0}, {0, 1, 0}, 70, 70, 64, 64));
    }
    // Random triangle soups in front of the camera, wound toward it.
    for (int scene = 0; scene < 2; ++scene) {
        std::vector<std::array<Vec3d, 3>> tris;
        for (int k = 0; k < 12; ++k) {
            const Vec3d c{0.5 * u(rng), 0.5 * u(rng), 0.4 * u(rng)};
            std::array<Vec3d, 3> t{c + Vec3d{0.3 * u(rng), 0.3 * u(rng), 0.2 * u(rng)},
                                   c + Vec3d{0.3 * u(rng), 0.3 * u(rng), 0.2 * u(rng)},
                                   c + Vec3d{0.3 * u(rng), 0.3 * u(rng), 0.2 * u(rng)}};
            if (cross(t[1] - t[0], t[2] - t[0]).z < 0) std::swap(t[1], t[2]);
            tris.push_back(t);
        }
        const TriMesh m = triangle_soup(tris);
        expect_matches_oracle(m, Camera::look_at({0.1 * scene, 0, 2.5}, {0, 0, 0}, {0, 1, 0},
                                                 90, 90, 64, 64));
    }
}

TEST(Rasterize, WorkerCountInvariant) {
    const TriMesh m = make_sphere(16);
    const Camera cam = Camera::look_at({0.3, 0.4, 1.2}, {0, 0, 0}, {0, 1, 0}, 60, 60, 64, 48);
    const GBuffer a = rasterize(m, cam, 1), b = rasterize(m, cam, 3);
    ASSERT_EQ(a.pixels.size(), b.pixels.size());
    for (std::size_t p = 0; p < a.pixels.size(); ++p) {
        EXPECT_EQ(a.pixels[p].covered, b.pixels[p].covered);
        EXPECT_EQ(a.pixels[p].triangle, b.pixels[p].triangle);
        EXPECT_EQ(a.pixels[p].sample.u, b.pixels[p].sample.u);
        EXPECT_EQ(a.pixels[p].sample.footprint, b.pixels[p].sample.footprint);
    }
}

TEST(Rasterize, UvDerivativesMatchNeighbors) {
    // On a single planar triangle the exact screen derivative of uv agrees
    // with the central difference of neighboring pixel uvs to second order.
    const TriMesh m = triangle_soup({{Vec3d{-1, -1, 0}, Vec3d{1, -1, -0.5}, Vec3d{-1, 1, 0.3}}});
    const Camera cam = Camera::look_at({0.2, 0.1, 2.5}, {0, 0, 0}, {0, 1, 0}, 60, 60, 64, 64);
    const GBuffer gb = rasterize(m, cam);
    int checked = 0;
    for (int y = 1; y < 63; ++y)
        for (int x = 1; x < 63; ++x) {
            const GPixel &c = gb.at(x, y);
            const GPixel &l = gb.at(x - 1, y), &r = gb.at(x + 1, y);
            if (!c.covered || !l.covered || !r.covered) continue;
            EXPECT_NEAR(c.dudx, 0.5 * (r.sample.u - l.sample.u), 1e-4);
            EXPECT_NEAR(c.dvdx, 0.5 * (r.sample.v - l.sample.v), 1e-4);
            ++checked;
        }
    EXPECT_GT(checked, 100);
}

TEST(Rasterize, DegenerateCameraRejected) {
    Camera cam = Camera::look_at({0, 0, 2}, {0, 0, 0}, {0, 1, 0}, 60, 60, 16, 16);
    cam.fy = -1;
    EXPECT_THROW(rasterize(make_sphere(4), cam), ConfigError);
}

// --- normal map --------------------------------------------------------------

ShadingSample frame_sample() {
    ShadingSample s;
    s.tangent = {1, 0, 0};
    s.bitangent = {0, 1, 0};
    s.normal = {0, 0, 1};
    s.omega = {0, 0, 1};
    s.dist = 1;
    return s;
}

TEST(NormalMap, FlatIsGeometric) {
    const TriMesh m = make_sphere(16);
    const Camera cam = Camera::look_at({0, 0.5, 1.5}, {0, 0, 0}, {0, 1, 0}, 50, 50, 32, 32);
    const GBuffer gb = rasterize(m, cam);
    Texture flat(8, 3);
    for (std::size_t k = 0; k < flat.texel_count(); ++k) flat[k * 3 + 2] = 1;
    const auto normals = apply_normal_map(gb, flat);
    for (std::size_t p = 0; p < gb.pixels.size(); ++p) {
        if (!gb.pixels[p].covered) continue;
        EXPECT_NEAR(normals[p].x, gb.pixels[p].sample.normal.x, 1e-6);
        EXPECT_NEAR(normals[p].y, gb.pixels[p].sample.normal.y, 1e-6);
        EXPECT_NEAR(normals[p].z, gb.pixels[p].sample.normal.z, 1e-6);
    }
}

TEST(NormalMap, DecodedNormalsAreUnit) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1, 1);
    const ShadingSample s = frame_sample();
    for (int k = 0; k < 100; ++k)
        EXPECT_NEAR(length(decode_normal(s, {u(rng), u(rng), 0.5 + u(rng)})), 1, 1e-12);
}

TEST(NormalMap, SwappedFrameSwapsPerturbation) {
    ShadingSample a = frame_sample(), b = frame_sample();
    b.tangent = a.bitangent;
    b.bitangent = a.tangent;
    const Vec3d na = decode_normal(a, {1, 0, 0}), nb = decode_normal(b, {1, 0, 0});
    EXPECT_NEAR(na.x, 1, 1e-12);
    EXPECT_NEAR(nb.y, 1, 1e-12);
    EXPECT_NEAR(nb.x, 0, 1e-12);
}

TEST(NormalMap, ZeroTexelFallsBack) {
    const ShadingSample s = frame_sample();
    const Vec3d n = decode_normal(s, {0, 0, 0});
    EXPECT_EQ(n, (Vec3d{0, 0, 1}));
}

// --- mip level and weight ----------------------------------------------------

TEST(MipLevel, Values) {
    EXPECT_DOUBLE_EQ(mip_level(1.0 / 256, 256), 0.0);
    EXPECT_DOUBLE_EQ(mip_level(2.0 / 256, 256), 1.0);
    EXPECT_DOUBLE_EQ(mip_level(0.25 / 256, 256), 0.0);
    EXPECT_NEAR(mip_level(3.0 / 64, 64), std::log2(3.0), 1e-12);
}

TEST(MipLevel, SlopedQuadHasLargerLevel) {
    // Both quads carry uv = identity over their own square.
    const std::vector<std::array<Vec2d, 3>> uvs{{Vec2d{0, 0}, Vec2d{1, 0}, Vec2d{1, 1}},
                                                {Vec2d{0, 0}, Vec2d{1, 1}, Vec2d{0, 1}}};
    const TriMesh front = triangle_soup(square(0, 0, 0, 0.5), uvs);
    // Same quad rotated 45 degrees about the y axis.
    const double c = std::sqrt(0.5);
    const Vec3d a{-0.5 * c, -0.5, 0.5 * c}, b{0.5 * c, -0.5, -0.5 * c}, cc{0.5 * c, 0.5, -0.5 * c},
        d{-0.5 * c, 0.5, 0.5 * c};
    const TriMesh sloped = triangle_soup({{a, b, cc}, {a, cc, d}}, uvs);
    const Camera cam = Camera::look_at({0, 0, 2}, {0, 0, 0}, {0, 1, 0}, 100, 100, 65, 65);
    const GBuffer gf = rasterize(front, cam), gs = rasterize(sloped, cam);
    const GPixel &pf = gf.at(32, 32), &ps = gs.at(32, 32);
    ASSERT_TRUE(pf.covered && ps.covered);
    EXPECT_GT(mip_level(ps, 1024), mip_level(pf, 1024));
}

TEST(MipLevel, DoublingResolutionAddsOne) {
    const TriMesh m = make_sphere(16);
    const Camera cam = Camera::look_at({0, 0, 1.3}, {0, 0, 0}, {0, 1, 0}, 40, 40, 48, 48);
    const GBuffer gb = rasterize(m, cam);
    for (const GPixel &p : gb.pixels) {
        if (!p.covered) continue;
        const double l1 = mip_level(p, 256), l2 = mip_level(p, 512);
        if (l1 > 0) {
            EXPECT_NEAR(l2, l1 + 1, 1e-9);
        } else {
            EXPECT_GE(l2, 0.0);
        }
    }
}

TEST(PixelWeight, Values) {
    EXPECT_DOUBLE_EQ(pixel_weight(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(pixel_weight(1, 1.5), 0.0);
    EXPECT_DOUBLE_EQ(pixel_weight(0.8, 1.0), 0.0);
    EXPECT_NEAR(pixel_weight(0.8, 0.5), 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(pixel_weight(-0.2, 0), 0.0);
}

TEST(PixelWeight, InUnitInterval) {
    const TriMesh m = make_blob(16, 0.1, 9);
    const Camera cam = Camera::look_at({0.5, 0.5, 1.2}, {0, 0, 0}, {0, 1, 0}, 50, 50, 48, 48);
    const GBuffer gb = rasterize(m, cam);
    for (const GPixel &p : gb.pixels) {
        const double w = p.covered ? pixel_weight(p.cosv_geo(), mip_level(p, 64)) : 0.0;
        EXPECT_GE(w, 0);
        EXPECT_LE(w, 1);
    }
}

// --- shading -----------------------------------------------------------------

TEST(Shade, ZeroAttenuationIsBlack) {
    const TriMesh m = make_sphere(16);
    const Camera cam = Camera::look_at({0, 0, 1.5}, {0, 0, 0}, {0, 1, 0}, 40, 40, 32, 32);
    const Image img = shade(rasterize(m, cam), TextureSet::make(16, 0.5), PointLight{},
                            Image(32, 32, 1, 0.f), Polarization::Parallel);
    for (float v : img.data()) EXPECT_EQ(v, 0.f);
}

TEST(Shade, SphereBrightestAtCenter) {
    const TriMesh m = make_sphere(48);
    const Camera cam = Camera::look_at({0, 0, 1.5}, {0, 0, 0}, {0, 1, 0}, 60, 60, 65, 65);
    const Image img = shade(rasterize(m, cam), TextureSet::make(16, 0.5), PointLight{},
                            Image(65, 65, 1, 1.f), Polarization::Cross);
    int bx = -1, by = -1;
    float best = -1;
    for (int y = 0; y < 65; ++y)
        for (int x = 0; x < 65; ++x)
            if (img.at(x, y, 1) > best) {
                best = img.at(x, y, 1);
                bx = x;
                by = y;
            }
    EXPECT_EQ(bx, 32);
    EXPECT_EQ(by, 32);
}

TEST(Shade, UncoveredPixelsAreZero) {
    const TriMesh m = make_sphere(16);
    const Camera cam = Camera::look_at({0, 0, 3}, {0, 0, 0}, {0, 1, 0}, 40, 40, 32, 32);
    const GBuffer gb = rasterize(m, cam);
    const Image img =
        shade(gb, TextureSet::make(16, 0.5), PointLight{}, Image(32, 32, 1, 1.f), Polarization::Cross);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            if (gb.at(x, y).covered) continue;
            EXPECT_EQ(img.at(x, y, 0), 0.f);
        }
}

TEST(Shade, DeterministicAcrossWorkers) {
    const TriMesh m = make_blob(16, 0.1, 4);
    const TextureSet t = make_gt_textures(32, 3);
    const Camera cam = Camera::look_at({0.4, 0.2, 1.4}, {0, 0, 0}, {0, 1, 0}, 50, 50, 48, 48);
    const GBuffer gb = rasterize(m, cam);
    const Image ones(48, 48, 1, 1.f);
    const Image a = shade(gb, t, PointLight{}, ones, Polarization::Parallel, 1);
    const Image b = shade(gb, t, PointLight{}, ones, Polarization::Parallel, 1);
    const Image c = shade(gb, t, PointLight{}, ones, Polarization::Parallel, 4);
    for (std::size_t k = 0; k < a.data().size(); ++k) {
        EXPECT_EQ(a.data()[k], b.data()[k]);
        EXPECT_EQ(a.data()[k], c.data()[k]);
    }
}

TEST(Shade, DiffuseScaleOnlyInParallelMode) {
    const TriMesh m = make_sphere(16);
    const Camera cam = Camera::look_at({0, 0, 1.5}, {0, 0, 0}, {0, 1, 0}, 40, 40, 32, 32);
    const GBuffer gb = rasterize(m, cam);
    TextureSet t = TextureSet::make(16, 0.5);
    const Image ones(32, 32, 1, 1.f);
    const Image cross0 = shade(gb, t, PointLight{}, ones, Polarization::Cross);
    const Image par0 = shade(gb, t, PointLight{}, ones, Polarization::Parallel);
    t.diffuse_scale = {2, 1, 1};
    const Image cross1 = shade(gb, t, PointLight{}, ones, Polarization::Cross);
    const Image par1 = shade(gb, t, PointLight{}, ones, Polarization::Parallel);
    for (std::size_t k = 0; k < cross0.data().size(); ++k) EXPECT_EQ(cross0.data()[k], cross1.data()[k]);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            EXPECT_NEAR(par1.at(x, y, 0), 2 * par0.at(x, y, 0), 1e-6);
            EXPECT_EQ(par1.at(x, y, 1), par0.at(x, y, 1));
        }
}

TEST(Shade, AttenuationSizeMismatchThrows) {
    const TriMesh m = make_sphere(8);
    const Camera cam = Camera::look_at({0, 0, 1.5}, {0, 0, 0}, {0, 1, 0}, 40, 40, 32, 32);
    EXPECT_THROW(shade(rasterize(m, cam), TextureSet::make(16), PointLight{}, Image(16, 32, 1, 1.f),
                       Polarization::Cross),
                 DataError);
}

}  // namespace
}  // namespace skinfit
