// SPDX-License-Identifier: Apache-2.0

#include <skinfit/mesh.h>

#include <skinfit/error.h>
#include <skinfit/log.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

namespace skinfit {

double TriMesh::bounding_box_diagonal() const {
    if (positions.empty()) return 0;
    Vec3d lo = positions.front(), hi = positions.front();
    for (const Vec3d &p : positions)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    return length(hi - lo);
}

double TriMesh::surface_area() const {
    double area = 0;
    for (const auto &t : triangles)
        area += 0.5 * length(cross(positions[t[1]] - positions[t[0]],
                                   positions[t[2]] - positions[t[0]]));
    return area;
}

void TriMesh::validate() const {
    const std::size_t n = positions.size();
    if (uvs.size() != n || normals.size() != n || position_id.size() != n)
        throw DataError("mesh attribute arrays have inconsistent sizes");
    for (const auto &t : triangles)
        for (auto i : t)
            if (i >= n) throw DataError("triangle index out of range");
    for (const Vec2d &uv : uvs)
        if (uv.x < 0 || uv.x > 1 || uv.y < 0 || uv.y > 1)
            throw DataError("UV coordinate outside [0,1]");
    for (const Vec3d &nrm : normals)
        if (std::abs(length(nrm) - 1) > 1e-6) throw DataError("vertex normal is not unit length");
    if (!tangents.empty()) {
        if (tangents.size() != n || bitangents.size() != n)
            throw DataError("tangent frame arrays have inconsistent sizes");
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(length(tangents[i]) - 1) > 1e-6 ||
                std::abs(length(bitangents[i]) - 1) > 1e-6 ||
                std::abs(dot(tangents[i], normals[i])) > 1e-6 ||
                std::abs(dot(bitangents[i], normals[i])) > 1e-6)
                throw DataError("tangent frame is not orthonormal");
        }
    }
}

double normalize_unit_scale(TriMesh &mesh) {
    const double diag = mesh.bounding_box_diagonal();
    if (!(diag > 0)) throw DataError("mesh has a degenerate bounding box");
    const double s = 1.0 / diag;
    for (Vec3d &p : mesh.positions) p *= s;
    return s;
}

void compute_vertex_normals(TriMesh &mesh) {
    std::uint32_t ids = 0;
    for (auto id : mesh.position_id) ids = std::max(ids, id + 1);
    std::vector<Vec3d> acc(ids);
    for (const auto &t : mesh.triangles) {
        // Unnormalized cross product: length is twice the area.
        const Vec3d fn = cross(mesh.positions[t[1]] - mesh.positions[t[0]],
                               mesh.positions[t[2]] - mesh.positions[t[0]]);
        for (auto i : t) acc[mesh.position_id[i]] += fn;
    }
    mesh.normals.resize(mesh.vertex_count());
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        const Vec3d a = acc[mesh.position_id[i]];
        const double len = length(a);
        mesh.normals[i] = len > 0 ? a / len : Vec3d{0, 0, 1};
    }
}

std::size_t compute_tangent_frames(TriMesh &mesh) {
    const std::size_t n = mesh.vertex_count();
    std::vector<Vec3d> tacc(n), bacc(n);
    for (const auto &t : mesh.triangles) {
        const Vec3d e1 = mesh.positions[t[1]] - mesh.positions[t[0]];
        const Vec3d e2 = mesh.positions[t[2]] - mesh.positions[t[0]];
        const Vec2d d1 = mesh.uvs[t[1]] - mesh.uvs[t[0]];
        const Vec2d d2 = mesh.uvs[t[2]] - mesh.uvs[t[0]];
        const double det = d1.x * d2.y - d2.x * d1.y;
        if (std::abs(det) < 1e-14) continue;
        const Vec3d dpdu = (e1 * d2.y - e2 * d1.y) / det;
        const Vec3d dpdv = (e2 * d1.x - e1 * d2.x) / det;
        for (auto i : t) {
            tacc[i] += dpdu;
            bacc[i] += dpdv;
        }
    }

    mesh.tangents.resize(n);
    mesh.bitangents.resize(n);
    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3d nrm = mesh.normals[i];
        Vec3d t = tacc[i] - nrm * dot(nrm, tacc[i]);
        const double tl = length(t);
        Vec3d b;
        if (tl > 1e-12) {
            t = t / tl;
            b = bacc[i] - nrm * dot(nrm, bacc[i]) - t * dot(t, bacc[i]);
            const double bl = length(b);
            b = bl > 1e-12 ? b / bl : cross(nrm, t);
        } else {
            t = any_orthonormal(nrm);
            b = cross(nrm, t);
            ++fallbacks;
        }
        mesh.tangents[i] = t;
        mesh.bitangents[i] = b;
    }
    if (fallbacks > 0)
        log_warning(std::to_string(fallbacks) +
                    " vertices have degenerate UV gradients; using arbitrary tangent frames");
    return fallbacks;
}

namespace {

// OBJ indices are 1-based; negative values count back from the end.
long resolve_index(long idx, std::size_t count, int line) {
    const long r = idx > 0 ? idx - 1 : long(count) + idx;
    if (idx == 0 || r < 0 || r >= long(count))
        throw DataError("OBJ line " + std::to_string(line) + ": index out of range");
    return r;
}

}  // namespace

ObjLoadResult load_obj(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::vector<Vec3d> v;
    std::vector<Vec2d> vt;
    std::vector<Vec3d> vn;
    std::map<std::tuple<long, long, long>, std::uint32_t> vertex_of;
    ObjLoadResult result;
    TriMesh &mesh = result.mesh;
    bool have_normals = true;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3d p;
            if (!(ls >> p.x >> p.y >> p.z))
                throw DataError("OBJ line " + std::to_string(lineno) + ": bad vertex");
            v.push_back(p);
        } else if (tag == "vt") {
            Vec2d uv;
            if (!(ls >> uv.x >> uv.y))
                throw DataError("OBJ line " + std::to_string(lineno) + ": bad texture coordinate");
            vt.push_back(uv);
        } else if (tag == "vn") {
            Vec3d nrm;
            if (!(ls >> nrm.x >> nrm.y >> nrm.z))
                throw DataError("OBJ line " + std::to_string(lineno) + ": bad normal");
            vn.push_back(nrm);
        } else if (tag == "f") {
            std::vector<std::string> corners;
            std::string c;
            while (ls >> c) corners.push_back(c);
            if (corners.size() != 3)
                throw DataError("OBJ line " + std::to_string(lineno) + ": only triangles supported");
            std::array<std::uint32_t, 3> tri{};
            for (int k = 0; k < 3; ++k) {
                long iv = 0, it = 0, in_ = 0;
                const std::string &s = corners[k];
                const auto s1 = s.find('/');
                if (s1 == std::string::npos || s1 + 1 >= s.size() || s[s1 + 1] == '/')
                    throw DataError("OBJ line " + std::to_string(lineno) + ": missing UVs");
                const auto s2 = s.find('/', s1 + 1);
                try {
                    iv = std::stol(s.substr(0, s1));
                    it = std::stol(s.substr(s1 + 1, s2 == std::string::npos ? s2 : s2 - s1 - 1));
                    if (s2 != std::string::npos && s2 + 1 < s.size()) in_ = std::stol(s.substr(s2 + 1));
                } catch (const std::exception &) {
                    throw DataError("OBJ line " + std::to_string(lineno) + ": bad face index");
                }
                iv = resolve_index(iv, v.size(), lineno);
                it = resolve_index(it, vt.size(), lineno);
                if (in_ != 0)
                    in_ = resolve_index(in_, vn.size(), lineno);
                else {
                    in_ = -1;
                    have_normals = false;
                }
                const auto key = std::make_tuple(iv, it, in_);
                auto found = vertex_of.find(key);
                if (found == vertex_of.end()) {
                    const auto id = std::uint32_t(mesh.positions.size());
                    mesh.positions.push_back(v[iv]);
                    mesh.uvs.push_back(vt[it]);
                    mesh.normals.push_back(in_ >= 0 ? normalize(vn[in_]) : Vec3d{});
                    mesh.position_id.push_back(std::uint32_t(iv));
                    found = vertex_of.emplace(key, id).first;
                }
                tri[k] = found->second;
            }
            mesh.triangles.push_back(tri);
        }
        // Other statements (o, g, s, usemtl, mtllib) are ignored.
    }
    if (mesh.triangles.empty()) throw DataError(path.string() + ": no faces");
    if (!have_normals) compute_vertex_normals(mesh);

    result.scale = normalize_unit_scale(mesh);
    compute_tangent_frames(mesh);
    mesh.validate();
    return result;
}

void save_obj(const std::filesystem::path &path, const TriMesh &mesh) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    std::uint32_t ids = 0;
    for (auto id : mesh.position_id) ids = std::max(ids, id + 1);
    std::vector<Vec3d> unique(ids);
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) unique[mesh.position_id[i]] = mesh.positions[i];

    char buf[160];
    for (const Vec3d &p : unique) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
        out << buf;
    }
    for (const Vec2d &uv : mesh.uvs) {
        std::snprintf(buf, sizeof buf, "vt %.17g %.17g\n", uv.x, uv.y);
        out << buf;
    }
    for (const Vec3d &nrm : mesh.normals) {
        std::snprintf(buf, sizeof buf, "vn %.17g %.17g %.17g\n", nrm.x, nrm.y, nrm.z);
        out << buf;
    }
    for (const auto &t : mesh.triangles) {
        out << 'f';
        for (auto i : t) out << ' ' << mesh.position_id[i] + 1 << '/' << i + 1 << '/' << i + 1;
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace skinfit
