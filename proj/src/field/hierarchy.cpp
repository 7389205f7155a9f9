#include "hsdf/field/hierarchy.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace hsdf::field {

void MeanKernel::validate() const
{
    require(k >= 1 && k % 2 == 1, ErrorCode::InvalidArgument, "mean kernel size must be odd and positive");
}

double SobelKernel7::gain()
{
    double g = 0.0;
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 7; ++c) {
            g += smooth[r] * deriv[c] * (c - 3);
        }
    }
    return g;
}

double DisplacementMap::sample(double u, double v) const
{
    const double x = std::clamp(u, 0.0, static_cast<double>(width - 1));
    const double y = std::clamp(v, 0.0, static_cast<double>(height - 1));
    const int x0 = std::min(static_cast<int>(x), width - 1);
    const int y0 = std::min(static_cast<int>(y), height - 1);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1 - fx) * at(x0, y1) + fx * at(x1, y1));
}

Image DisplacementMap::to_image() const
{
    Image img(width, height, 1);
    for (std::size_t p = 0; p < values.size(); ++p) {
        img.data[p] = static_cast<float>(values[p]);
    }
    return img;
}

void CarveGain::validate() const
{
    require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::InvalidArgument, "carve gain must be >= 0");
}

namespace {

// Box mean along one axis with edge replication, via a running sum.
void mean_axis(const ScalarField3& in, ScalarField3& out, int axis, int k)
{
    const int r = k / 2;
    const int n = in.dims[axis];
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    const std::size_t lines = static_cast<std::size_t>(in.dims[a1]) * in.dims[a2];
    parallel_for(lines, [&](std::size_t l0, std::size_t l1) {
        std::vector<double> line(n + 2 * r);
        std::array<int, 3> idx{};
        for (std::size_t l = l0; l < l1; ++l) {
            idx[a1] = static_cast<int>(l % in.dims[a1]);
            idx[a2] = static_cast<int>(l / in.dims[a1]);
            for (int t = -r; t < n + r; ++t) {
                idx[axis] = std::clamp(t, 0, n - 1);
                line[t + r] = in.at(idx[0], idx[1], idx[2]);
            }
            for (int t = 0; t < n; ++t) {
                double s = 0.0;
                for (int o = 0; o < k; ++o) {
                    s += line[t + o];
                }
                idx[axis] = t;
                out.at(idx[0], idx[1], idx[2]) = s / k;
            }
        }
    });
}

// Continuous index of the first and last sign change along a column.
std::optional<double> column_split(const ScalarField3& f, int i, int j)
{
    const int nz = f.dims[2];
    double first = -1.0;
    double last = -1.0;
    for (int k = 0; k + 1 < nz; ++k) {
        const double a = f.at(i, j, k);
        const double b = f.at(i, j, k + 1);
        if ((a < 0.0) != (b < 0.0)) {
            const double t = k + a / (a - b);
            if (first < 0.0) {
                first = t;
            }
            last = t;
        }
    }
    if (first < 0.0) {
        return std::nullopt;
    }
    return 0.5 * (first + last);
}

} // namespace

ScalarField3 mean_convolve3(const ScalarField3& f, const MeanKernel& kernel)
{
    kernel.validate();
    f.validate();
    require(kernel.k <= *std::min_element(f.dims.begin(), f.dims.end()), ErrorCode::InvalidArgument,
            "mean kernel larger than the field");
    ScalarField3 a = f;
    ScalarField3 b = f;
    mean_axis(f, a, 0, kernel.k);
    mean_axis(a, b, 1, kernel.k);
    mean_axis(b, a, 2, kernel.k);
    return a;
}

ScalarField3 highpass_target(const ScalarField3& f, const MeanKernel& kernel)
{
    const ScalarField3 m = mean_convolve3(f, kernel);
    ScalarField3 out = f;
    for (std::size_t n = 0; n < out.size(); ++n) {
        out.values[n] = f.values[n] - m.values[n];
    }
    return out;
}

DisplacementMap normal_displacement(const Image& normals, const SobelKernel7& kernel, const CarveGain& gain)
{
    gain.validate();
    require(normals.channels >= 2, ErrorCode::InvalidArgument, "normal map needs at least two channels");
    const int w = normals.width;
    const int h = normals.height;
    auto is_bg = [&](int x, int y) {
        for (int c = 0; c < normals.channels; ++c) {
            if (normals.at(x, y, c) != 0.0f) {
                return false;
            }
        }
        return true;
    };
    DisplacementMap out(w, h);
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
        for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
            for (int x = 0; x < w; ++x) {
                if (is_bg(x, y)) {
                    continue;
                }
                double acc = 0.0;
                for (int r = 0; r < 7; ++r) {
                    const int yy = std::clamp(y + r - 3, 0, h - 1);
                    for (int c = 0; c < 7; ++c) {
                        int xx = std::clamp(x + c - 3, 0, w - 1);
                        int sy = yy;
                        if (is_bg(xx, sy)) {
                            xx = x;
                            sy = y;
                        }
                        acc += kernel.gx(r, c) * normals.at(xx, sy, 0) + kernel.gy(r, c) * normals.at(xx, sy, 1);
                    }
                }
                out.at(x, y) = gain.lambda * acc;
            }
        }
    });
    return out;
}

ScalarField3 carve_displacements(const ScalarField3& f, const DisplacementMap& front_disp, const DisplacementMap& back_disp,
                                 const CropAlignedCamera& camera)
{
    f.validate();
    require(front_disp.width == back_disp.width && front_disp.height == back_disp.height, ErrorCode::SizeMismatch,
            "front and back displacement sizes differ");
    require(front_disp.width == camera.width && front_disp.height == camera.height, ErrorCode::SizeMismatch,
            "displacement maps must match the camera");
    const double voxel = f.spacing().z();
    ScalarField3 out = f;
    const std::size_t cols = static_cast<std::size_t>(f.dims[0]) * f.dims[1];
    parallel_for(cols, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c) {
            const int i = static_cast<int>(c % f.dims[0]);
            const int j = static_cast<int>(c / f.dims[0]);
            const auto split = column_split(f, i, j);
            if (!split) {
                continue;
            }
            const Projection px = project(camera, f.node_position(i, j, 0));
            const double df = front_disp.sample(px.u - 0.5, px.v - 0.5);
            const double db = back_disp.sample(px.u - 0.5, px.v - 0.5);
            for (int k = 0; k < f.dims[2]; ++k) {
                out.at(i, j, k) += (k < *split ? df : db) * voxel;
            }
        }
    });
    return out;
}

ScalarField3 carve_normals(const ScalarField3& f, const Image& front_normals, const Image& back_normals,
                           const CropAlignedCamera& camera, const SobelKernel7& kernel, const CarveGain& gain)
{
    return carve_displacements(f, normal_displacement(front_normals, kernel, gain),
                               normal_displacement(back_normals, kernel, gain), camera);
}

ScalarField3 compose_field(const ScalarField3& base, const ScalarField3& fine, const Image& front_normals,
                           const Image& back_normals, const CropAlignedCamera& camera, const SobelKernel7& kernel,
                           const CarveGain& gain)
{
    require(base.same_lattice(fine), ErrorCode::SizeMismatch, "base and fine fields differ in lattice");
    ScalarField3 sum = base;
    for (std::size_t n = 0; n < sum.size(); ++n) {
        sum.values[n] += fine.values[n];
    }
    return carve_normals(sum, front_normals, back_normals, camera, kernel, gain);
}

} // namespace hsdf::field
