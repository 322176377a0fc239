// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_MESH_H
#define SKINFIT_MESH_H

#include <skinfit/vecmath.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace skinfit {

// Triangle mesh with one UV per vertex. Vertices are split wherever a
// position carries several UVs (seams), so per-corner UVs are represented
// as per-vertex UVs of distinct vertices. `position_id` ties split vertices
// back to a shared geometric position.
struct TriMesh {
    std::vector<Vec3d> positions;
    std::vector<Vec2d> uvs;
    std::vector<Vec3d> normals;
    std::vector<Vec3d> tangents;
    std::vector<Vec3d> bitangents;
    std::vector<std::uint32_t> position_id;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    std::size_t vertex_count() const { return positions.size(); }
    std::size_t triangle_count() const { return triangles.size(); }

    double bounding_box_diagonal() const;
    double surface_area() const;
    // Throws DataError if indices, UVs, or frames violate the mesh invariants.
    void validate() const;
};

// Uniform scale about the origin so the bounding-box diagonal is 1.
// Returns the applied factor.
double normalize_unit_scale(TriMesh &mesh);

// Area-weighted average of incident face normals, shared across split vertices.
void compute_vertex_normals(TriMesh &mesh);

// Per-vertex tangent frames from UV derivatives of incident faces,
// Gram-Schmidt orthogonalized against the normal. Returns how many vertices
// had no usable UV gradient and received an arbitrary orthonormal frame.
std::size_t compute_tangent_frames(TriMesh &mesh);

struct ObjLoadResult {
    TriMesh mesh;
    double scale = 1.0;  // factor applied by unit-scale normalization
};

// Wavefront OBJ subset: v, vt, vn, f (triangles only, v/vt or v/vt/vn).
ObjLoadResult load_obj(const std::filesystem::path &path);
void save_obj(const std::filesystem::path &path, const TriMesh &mesh);

}  // namespace skinfit

#endif  // SKINFIT_MESH_H
