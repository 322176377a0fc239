// SPDX-License-Identifier: Apache-2.0

#include <skinfit/raster.h>

#include <skinfit/error.h>
#include <skinfit/parallel.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace skinfit {

std::size_t GBuffer::covered_count() const {
    return std::size_t(std::count_if(pixels.begin(), pixels.end(),
                                     [](const GPixel &p) { return p.covered; }));
}

SampleBuffer compact(const GBuffer &gbuffer) {
    SampleBuffer out;
    out.width = gbuffer.width;
    out.height = gbuffer.height;
    for (std::size_t p = 0; p < gbuffer.pixels.size(); ++p) {
        if (!gbuffer.pixels[p].covered) continue;
        out.pixel.push_back(std::uint32_t(p));
        out.samples.push_back(gbuffer.pixels[p].sample);
    }
    return out;
}

namespace {

struct ScreenPoint {
    double x, y;
};

double edge(const ScreenPoint &a, const ScreenPoint &b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

constexpr double kNear = 1e-6;

struct TriangleSetup {
    bool visible = false;
    Vec3d cam[3];
    ScreenPoint screen[3];
    double area = 0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

TriangleSetup setup_triangle(const TriMesh &mesh, const Camera &camera, std::size_t t) {
    TriangleSetup s;
    const auto &tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
        s.cam[k] = camera.to_camera(mesh.positions[tri[k]]);
        if (s.cam[k].z < kNear) return s;  // no near-plane clipping
        s.screen[k] = {camera.fx * s.cam[k].x / s.cam[k].z + camera.cx,
                       camera.fy * s.cam[k].y / s.cam[k].z + camera.cy};
    }
    const Vec3d fn = cross(s.cam[1] - s.cam[0], s.cam[2] - s.cam[0]);
    if (dot(fn, s.cam[0]) >= 0) return s;  // back-facing
    s.area = edge(s.screen[0], s.screen[1], s.screen[2].x, s.screen[2].y);
    if (s.area == 0) return s;
    double minx = s.screen[0].x, maxx = minx, miny = s.screen[0].y, maxy = miny;
    for (int k = 1; k < 3; ++k) {
        minx = std::min(minx, s.screen[k].x);
        maxx = std::max(maxx, s.screen[k].x);
        miny = std::min(miny, s.screen[k].y);
        maxy = std::max(maxy, s.screen[k].y);
    }
    // Pixel x is sampled at x + 0.5.
    s.x0 = std::max(0, int(std::ceil(minx - 0.5)));
    s.x1 = std::min(camera.width - 1, int(std::floor(maxx - 0.5)));
    s.y0 = std::max(0, int(std::ceil(miny - 0.5)));
    s.y1 = std::min(camera.height - 1, int(std::floor(maxy - 0.5)));
    s.visible = s.x0 <= s.x1 && s.y0 <= s.y1;
    return s;
}

void screen_barycentrics(const TriangleSetup &s, double px, double py, double lambda[3]) {
    lambda[0] = edge(s.screen[1], s.screen[2], px, py) / s.area;
    lambda[1] = edge(s.screen[2], s.screen[0], px, py) / s.area;
    lambda[2] = edge(s.screen[0], s.screen[1], px, py) / s.area;
}

void fill_attributes(GPixel &g, const TriangleSetup &s, const TriMesh &mesh, const Camera &camera,
                     double px, double py) {
    const auto &tri = mesh.triangles[std::size_t(g.triangle)];
    double lambda[3];
    screen_barycentrics(s, px, py, lambda);
    // d lambda_i / dx and / dy from the edge functions.
    const double dldx[3] = {-(s.screen[2].y - s.screen[1].y) / s.area,
                            -(s.screen[0].y - s.screen[2].y) / s.area,
                            -(s.screen[1].y - s.screen[0].y) / s.area};
    const double dldy[3] = {(s.screen[2].x - s.screen[1].x) / s.area,
                            (s.screen[0].x - s.screen[2].x) / s.area,
                            (s.screen[1].x - s.screen[0].x) / s.area};
    double q[3], dqdx[3], dqdy[3], sum = 0, dsumdx = 0, dsumdy = 0;
    for (int k = 0; k < 3; ++k) {
        q[k] = lambda[k] / s.cam[k].z;
        dqdx[k] = dldx[k] / s.cam[k].z;
        dqdy[k] = dldy[k] / s.cam[k].z;
        sum += q[k];
        dsumdx += dqdx[k];
        dsumdy += dqdy[k];
    }
    double b[3];
    for (int k = 0; k < 3; ++k) b[k] = q[k] / sum;

    Vec2d uv, duv_dx, duv_dy;
    Vec3d n, t, bt, pc;
    for (int k = 0; k < 3; ++k) {
        const Vec2d tuv = mesh.uvs[tri[k]];
        uv = uv + tuv * b[k];
        duv_dx = duv_dx + tuv * dqdx[k];
        duv_dy = duv_dy + tuv * dqdy[k];
        n += mesh.normals[tri[k]] * b[k];
        t += mesh.tangents[tri[k]] * b[k];
        bt += mesh.bitangents[tri[k]] * b[k];
        pc += s.cam[k] * b[k];
    }
    duv_dx = (duv_dx - uv * dsumdx) * (1 / sum);
    duv_dy = (duv_dy - uv * dsumdy) * (1 / sum);

    n = normalize(n);
    t = t - n * dot(n, t);
    t = length(t) > 1e-12 ? normalize(t) : any_orthonormal(n);
    bt = bt - n * dot(n, bt) - t * dot(t, bt);
    bt = length(bt) > 1e-12 ? normalize(bt) : cross(n, t);

    const Mat3 to_world = camera.rotation.transposed();
    const double dist = length(pc);
    const Vec3d omega = to_world * (-pc / dist);
    const Vec3d fn = normalize(cross(mesh.positions[tri[1]] - mesh.positions[tri[0]],
                                     mesh.positions[tri[2]] - mesh.positions[tri[0]]));

    ShadingSample &ss = g.sample;
    ss.u = float(std::clamp(uv.x, 0.0, 1.0));
    ss.v = float(std::clamp(uv.y, 0.0, 1.0));
    ss.tangent = Vec3f(t);
    ss.bitangent = Vec3f(bt);
    ss.normal = Vec3f(n);
    ss.omega = Vec3f(omega);
    ss.dist = float(dist);
    ss.footprint = float(std::max(std::hypot(duv_dx.x, duv_dx.y), std::hypot(duv_dy.x, duv_dy.y)));
    g.face_normal = Vec3f(fn);
    g.dudx = float(duv_dx.x);
    g.dvdx = float(duv_dx.y);
    g.dudy = float(duv_dy.x);
    g.dvdy = float(duv_dy.y);
}

}  // namespace

GBuffer rasterize(const TriMesh &mesh, const Camera &camera, int workers) {
    camera.validate();
    if (mesh.tangents.size() != mesh.vertex_count())
        throw DataError("rasterize needs a mesh with tangent frames");

    std::vector<TriangleSetup> setups(mesh.triangle_count());
    for (std::size_t t = 0; t < setups.size(); ++t) setups[t] = setup_triangle(mesh, camera, t);

    GBuffer gb;
    gb.width = camera.width;
    gb.height = camera.height;
    gb.pixels.assign(std::size_t(camera.width) * camera.height, GPixel{});

    // Each worker owns a band of rows and visits triangles in index order,
    // so the nearest-wins outcome (first triangle on exact ties) is the same
    // for any worker count.
    parallel_for(std::size_t(camera.height), workers, [&](std::size_t row0, std::size_t row1) {
        std::vector<double> depth(std::size_t(camera.width) * (row1 - row0),
                                  std::numeric_limits<double>::infinity());
        for (std::size_t t = 0; t < setups.size(); ++t) {
            const TriangleSetup &s = setups[t];
            if (!s.visible) continue;
            const int y0 = std::max(s.y0, int(row0)), y1 = std::min(s.y1, int(row1) - 1);
            for (int y = y0; y <= y1; ++y)
                for (int x = s.x0; x <= s.x1; ++x) {
                    double l[3];
                    screen_barycentrics(s, x + 0.5, y + 0.5, l);
                    if (l[0] < 0 || l[1] < 0 || l[2] < 0) continue;
                    const double z = 1 / (l[0] / s.cam[0].z + l[1] / s.cam[1].z + l[2] / s.cam[2].z);
                    double &d = depth[std::size_t(y - int(row0)) * camera.width + x];
                    if (z < d) {
                        d = z;
                        GPixel &g = gb.pixels[std::size_t(y) * camera.width + x];
                        g.covered = true;
                        g.triangle = std::int32_t(t);
                        g.depth = float(z);
                    }
                }
        }
        for (std::size_t y = row0; y < row1; ++y)
            for (int x = 0; x < camera.width; ++x) {
                GPixel &g = gb.pixels[y * camera.width + x];
                if (g.covered)
                    fill_attributes(g, setups[std::size_t(g.triangle)], mesh, camera, x + 0.5,
                                    double(y) + 0.5);
            }
    });
    return gb;
}

Vec3d decode_normal(const ShadingSample &s, const TexelValue &texel, Vec3d *unnormalized) {
    const Vec3d m = Vec3d(s.tangent) * texel[0] + Vec3d(s.bitangent) * texel[1] +
                    Vec3d(s.normal) * texel[2];
    if (unnormalized) *unnormalized = m;
    const double len = length(m);
    if (!(len > 1e-12)) return Vec3d(s.normal);
    return m / len;
}

std::vector<Vec3d> apply_normal_map(const GBuffer &gbuffer, const Texture &normal_texture) {
    std::vector<Vec3d> out(gbuffer.pixels.size());
    for (std::size_t p = 0; p < gbuffer.pixels.size(); ++p) {
        const GPixel &g = gbuffer.pixels[p];
        if (!g.covered) continue;
        out[p] = decode_normal(g.sample, bilinear_sample(normal_texture, {g.sample.u, g.sample.v}));
    }
    return out;
}

double mip_level(double footprint, int resolution) {
    const double texels = footprint * resolution;
    if (!(texels > 1)) return 0;
    return std::log2(texels);
}

double mip_level(const GPixel &pixel, int resolution) {
    return mip_level(pixel.sample.footprint, resolution);
}

double pixel_weight(double cosv, double level) {
    if (!(level < 1)) return 0;
    return std::clamp(cosv, 0.0, 1.0) * (1 - level);
}

SampleFootprints::SampleFootprints(const TextureSet &t, double u, double v)
    : kd(t.kd.resolution(), u, v) {
    const int r = t.kd.resolution();
    ks = t.ks.resolution() == r ? kd : BilinearFootprint(t.ks.resolution(), u, v);
    ka = t.ka.resolution() == r ? kd : BilinearFootprint(t.ka.resolution(), u, v);
    normal = t.normal.resolution() == r ? kd : t.normal.resolution() == t.ks.resolution()
                                                   ? ks
                                                   : BilinearFootprint(t.normal.resolution(), u, v);
}

SampleEval evaluate_sample(const ShadingSample &s, const SampleFootprints &fp,
                           const TextureSet &textures, const Vec3d &intensity,
                           const Vec3d &attenuation, Polarization mode,
                           brdf::BrdfDerivatives *derivs) {
    SampleEval e;
    e.attenuation = attenuation;
    const TexelValue kd = bilinear_sample(textures.kd, fp.kd);
    const TexelValue ks = bilinear_sample(textures.ks, fp.ks);
    const TexelValue ka = bilinear_sample(textures.ka, fp.ka);
    const TexelValue nt = bilinear_sample(textures.normal, fp.normal);

    e.shading_normal = decode_normal(s, nt, &e.unnormalized_normal);
    e.normal_fallback = !(length(e.unnormalized_normal) > 1e-12);
    e.raw_cos = dot(e.shading_normal, Vec3d(s.omega));

    e.kd_texel = {kd[0], kd[1], kd[2]};
    brdf::ShadingInputs &in = e.inputs;
    in.cosv = std::clamp(e.raw_cos, 0.0, 1.0);
    in.dist = s.dist;
    in.kd = e.kd_texel;
    if (mode == Polarization::Parallel)
        in.kd = hadamard(in.kd, Vec3d{textures.diffuse_scale[0], textures.diffuse_scale[1],
                                      textures.diffuse_scale[2]});
    in.ks = ks[0];
    in.ka = {ka[0], ka[1], ka[2]};
    in.alpha = textures.alpha;
    in.intensity = intensity;
    if (e.raw_cos <= 0) {
        // Facing away from the flash: no light, no gradient.
        if (derivs) *derivs = {};
        return e;
    }
    e.rendered = hadamard(brdf::radiance(in, mode, derivs), attenuation);
    return e;
}

namespace {

Vec3d attenuation_at(const AttenuationMap &m, std::size_t pixel) {
    return {m.channel(pixel, 0), m.channel(pixel, 1), m.channel(pixel, 2)};
}

void check_attenuation(const AttenuationMap &m, int width, int height) {
    if (m.width() != width || m.height() != height)
        throw DataError("attenuation map is " + std::to_string(m.width()) + "x" +
                        std::to_string(m.height()) + " but the image is " + std::to_string(width) +
                        "x" + std::to_string(height));
}

}  // namespace

Image shade(const SampleBuffer &samples, const TextureSet &textures, const PointLight &light,
            const AttenuationMap &attenuation, Polarization mode, int workers) {
    check_attenuation(attenuation, samples.width, samples.height);
    Image out(samples.width, samples.height, 3);
    auto data = out.data();
    parallel_for(samples.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const ShadingSample &s = samples.samples[i];
            const std::size_t p = samples.pixel[i];
            const SampleEval e = evaluate_sample(s, SampleFootprints(textures, s.u, s.v), textures,
                                                 light.intensity, attenuation_at(attenuation, p),
                                                 mode);
            for (int c = 0; c < 3; ++c) data[p * 3 + c] = float(e.rendered[c]);
        }
    });
    return out;
}

Image shade(const GBuffer &gbuffer, const TextureSet &textures, const PointLight &light,
            const AttenuationMap &attenuation, Polarization mode, int workers) {
    return shade(compact(gbuffer), textures, light, attenuation, mode, workers);
}

}  // namespace skinfit
