#pragma once

#include "hsdf/geom/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace hsdf {

using Face = std::array<int, 3>;

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Vec2> uvs;         // optional, per vertex, [0,1]^2
    std::vector<Vec3> normals;     // optional, per vertex, unit
    std::vector<int> face_labels;  // optional, per face region id (0 = unlabeled)

    bool empty() const { return faces.empty(); }

    // Throws Error(InvalidArgument) describing the first violated invariant.
    void validate() const;
};

/// Area-weighted vertex normals. Faces with area <= 1e-12 mm^2 are skipped;
/// vertices touched by no valid face get (0,0,0).
std::vector<Vec3> mesh_vertex_normals(const TriangleMesh& mesh);

/// Unnormalized face normal (length = 2 * area).
Vec3 face_cross(const TriangleMesh& mesh, int face);

double mesh_area(const TriangleMesh& mesh);

TriangleMesh transformed(const TriangleMesh& mesh, const RigidPose& pose);

/// Stable 64-bit FNV-1a hash over the mesh geometry, topology and labels.
std::uint64_t mesh_hash(const TriangleMesh& mesh);

/// Connected components over shared vertices; returns per-face component id
/// and the number of components.
std::vector<int> face_components(const TriangleMesh& mesh, int* count = nullptr);

/// Median edge length over all face edges (0 for an empty mesh).
double median_edge_length(const TriangleMesh& mesh);

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());

/// Axis-aligned cube with 8 shared corner vertices and 12 outward-facing triangles.
TriangleMesh make_cube(double half_size, const Vec3& center = Vec3::Zero());

} // namespace hsdf
