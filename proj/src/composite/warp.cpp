#include "hsdf/composite/warp.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace hsdf::composite {

namespace {

double tps_kernel(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }

} // namespace

void WarpSpec::validate() const
{
    require(src_points.size() == dst_points.size(), ErrorCode::SizeMismatch, "warp point counts differ");
    require(src_points.size() >= 3, ErrorCode::InvalidArgument, "warp needs at least 3 control points");
    for (std::size_t i = 0; i < src_points.size(); ++i) {
        for (std::size_t j = i + 1; j < src_points.size(); ++j) {
            require((src_points[i] - src_points[j]).norm() > 1e-6, ErrorCode::InvalidArgument,
                    "duplicate source control point");
            require((dst_points[i] - dst_points[j]).norm() > 1e-6, ErrorCode::InvalidArgument,
                    "duplicate destination control point");
        }
    }
}

ThinPlateSpline::ThinPlateSpline(const std::vector<Vec2>& from, const std::vector<Vec2>& to)
{
    require(from.size() == to.size() && from.size() >= 3, ErrorCode::InvalidArgument, "bad TPS control points");
    const int n = static_cast<int>(from.size());
    // work in a unit-sized frame so the kernel and affine blocks are comparable
    Vec2 lo = from.front();
    Vec2 hi = from.front();
    for (const auto& p : from) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    origin_ = 0.5 * (lo + hi);
    scale_ = std::max((hi - lo).maxCoeff(), 1e-12);
    centers_.reserve(from.size());
    for (const auto& p : from) {
        centers_.push_back((p - origin_) / scale_);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 3, n + 3);
    Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(n + 3, 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            a(i, j) = tps_kernel((centers_[i] - centers_[j]).squaredNorm());
        }
        a(i, n) = a(n, i) = 1.0;
        a(i, n + 1) = a(n + 1, i) = centers_[i].x();
        a(i, n + 2) = a(n + 2, i) = centers_[i].y();
        rhs.row(i) = to[i].transpose();
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    require(lu.isInvertible(), ErrorCode::Singular, "thin-plate spline system is singular (collinear points?)");
    weights_ = lu.solve(rhs);
}

Vec2 ThinPlateSpline::operator()(const Vec2& p_in) const
{
    const Vec2 p = (p_in - origin_) / scale_;
    const int n = static_cast<int>(centers_.size());
    Vec2 out = weights_.row(n).transpose() + p.x() * weights_.row(n + 1).transpose() +
               p.y() * weights_.row(n + 2).transpose();
    for (int i = 0; i < n; ++i) {
        out += tps_kernel((p - centers_[i]).squaredNorm()) * weights_.row(i).transpose();
    }
    return out;
}

Image warp_image(const Image& img, const WarpSpec& spec)
{
    spec.validate();
    // backward map: output location -> input location
    const ThinPlateSpline back(spec.dst_points, spec.src_points);
    Image out(img.width, img.height, img.channels);
    parallel_for(static_cast<std::size_t>(img.height), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const Vec2 s = back(Vec2(x, static_cast<double>(y)));
                for (int c = 0; c < img.channels; ++c) {
                    out.at(x, static_cast<int>(y), c) = static_cast<float>(bilinear_sample(img, s.x(), s.y(), c));
                }
            }
        }
    });
    return out;
}

} // namespace hsdf::composite
