#pragma once

#include "hsdf/geom/types.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace hsdf {

/// Signed distances on a cell-centered lattice over an axis-aligned box.
/// Node (i,j,k) sits at the center of voxel (i,j,k): box.min + (i+0.5) * spacing.
/// Values are negative inside the surface and stored x-fastest, then y, then z.
struct ScalarField3 {
    std::array<int, 3> dims{1, 1, 1};
    Box3 box;
    std::vector<double> values;

    ScalarField3() = default;
    ScalarField3(std::array<int, 3> d, const Box3& b, double fill = 0.0);

    std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) *
                                                  (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    double& at(int i, int j, int k) { return values[index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 spacing() const;
    Vec3 node_position(int i, int j, int k) const;
    bool same_lattice(const ScalarField3& other) const;
    void validate() const;
};

/// Trilinear interpolation; exact at lattice nodes. Points inside the box but
/// outside the outermost node shell use the nearest shell value along that axis.
/// Throws Error(OutOfDomain) for points outside the box.
double trilinear_sample(const ScalarField3& field, const Vec3& p);

} // namespace hsdf
