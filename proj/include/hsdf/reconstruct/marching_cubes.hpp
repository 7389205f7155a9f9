#pragma once

#include "hsdf/geom/field.hpp"
#include "hsdf/geom/mesh.hpp"

namespace hsdf::reconstruct {

/// Lookup-table marching cubes over the lattice nodes. Corners with value < iso
/// are inside; one vertex per sign-changing lattice edge, ordered by edge index,
/// with linear interpolation between the two nodes. Faces wind so that their
/// normals point toward increasing field values. No sign change gives an empty
/// mesh.
TriangleMesh marching_cubes(const ScalarField3& field, double iso = 0.0);

} // namespace hsdf::reconstruct
