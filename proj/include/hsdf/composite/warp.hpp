#pragma once

#include "hsdf/geom/image.hpp"
#include "hsdf/geom/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace hsdf::composite {

/// Matched control points in pixel-index coordinates. Content found at
/// src_points[i] in the input appears at dst_points[i] in the output.
struct WarpSpec {
    std::vector<Vec2> src_points;
    std::vector<Vec2> dst_points;

    void validate() const;
};

/// Interpolating 2D thin-plate spline with kernel r^2 log r.
class ThinPlateSpline {
public:
    ThinPlateSpline(const std::vector<Vec2>& from, const std::vector<Vec2>& to);

    Vec2 operator()(const Vec2& p) const;

private:
    std::vector<Vec2> centers_;  // normalized
    Vec2 origin_ = Vec2::Zero();
    double scale_ = 1.0;
    Eigen::MatrixX2d weights_;  // n kernel weights followed by 3 affine rows
};

/// Backward-mapped TPS warp with bilinear resampling (clamp to edge).
/// Throws Error(Singular) when the control points do not span the plane.
Image warp_image(const Image& img, const WarpSpec& spec);

} // namespace hsdf::composite
