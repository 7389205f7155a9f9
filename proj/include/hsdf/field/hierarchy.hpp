#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/field.hpp"
#include "hsdf/geom/image.hpp"

#include <array>
#include <vector>

namespace hsdf::field {

struct MeanKernel {
    int k = 5;
    void validate() const;
};

/// Separable 7x7 derivative pair. gx[row][col] = s[row] * v[col] / gain, applied
/// as a correlation, so a ramp f(x) = x responds with exactly 1.
struct SobelKernel7 {
    static constexpr std::array<double, 7> smooth{1, 6, 15, 20, 15, 6, 1};
    static constexpr std::array<double, 7> deriv{-1, -4, -5, 0, 5, 4, 1};
    static double gain();
    double gx(int row, int col) const { return smooth[row] * deriv[col] / gain(); }
    double gy(int row, int col) const { return gx(col, row); }
};

/// Single-channel double-precision map, row-major, top-left origin.
struct DisplacementMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    DisplacementMap() = default;
    DisplacementMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}
    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    /// Bilinear in pixel-index coordinates, clamped to the edge.
    double sample(double u, double v) const;
    Image to_image() const;
};

struct CarveGain {
    double lambda = 1.0;  // voxels per unit Sobel response
    void validate() const;
};

/// Mean over the k^3 neighbourhood with edge replication.
ScalarField3 mean_convolve3(const ScalarField3& f, const MeanKernel& kernel = {});

/// d - mean_convolve3(d).
ScalarField3 highpass_target(const ScalarField3& f, const MeanKernel& kernel = {});

/// lambda * (Gx * n_x + Gy * n_y) with edge replication. Pixels whose normal is
/// zero produce 0, and zero-normal neighbours inside the stencil are read as the
/// centre pixel, so the silhouette does not register as an edge.
DisplacementMap normal_displacement(const Image& normals, const SobelKernel7& kernel = {}, const CarveGain& gain = {});

/// Adds the front displacement to voxels nearer than the midpoint between the
/// first and last zero crossing of each depth column, and the back displacement
/// to the rest. The displacement is in voxels of the depth axis. Columns with
/// no crossing are left alone.
ScalarField3 carve_normals(const ScalarField3& f, const Image& front_normals, const Image& back_normals,
                           const CropAlignedCamera& camera, const SobelKernel7& kernel = {},
                           const CarveGain& gain = {});

/// Same as above with precomputed displacement maps.
ScalarField3 carve_displacements(const ScalarField3& f, const DisplacementMap& front_disp,
                                 const DisplacementMap& back_disp,
                                 const CropAlignedCamera& camera);

/// carve_normals(base + fine, ...).
ScalarField3 compose_field(const ScalarField3& base, const ScalarField3& fine, const Image& front_normals,
                           const Image& back_normals, const CropAlignedCamera& camera,
                           const SobelKernel7& kernel = {}, const CarveGain& gain = {});

} // namespace hsdf::field
