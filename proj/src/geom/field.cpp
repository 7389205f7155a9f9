#include "hsdf/geom/field.hpp"

#include "hsdf/geom/error.hpp"

#include <algorithm>
#include <cmath>

namespace hsdf {

ScalarField3::ScalarField3(std::array<int, 3> d, const Box3& b, double fill) : dims(d), box(b)
{
    require(d[0] > 0 && d[1] > 0 && d[2] > 0, ErrorCode::InvalidArgument, "field dims must be positive");
    require(b.valid(), ErrorCode::InvalidArgument, "field box min must be < max");
    values.assign(size(), fill);
}

Vec3 ScalarField3::spacing() const
{
    const Vec3 s = box.size();
    return {s.x() / dims[0], s.y() / dims[1], s.z() / dims[2]};
}

Vec3 ScalarField3::node_position(int i, int j, int k) const
{
    const Vec3 h = spacing();
    return box.min + Vec3((i + 0.5) * h.x(), (j + 0.5) * h.y(), (k + 0.5) * h.z());
}

bool ScalarField3::same_lattice(const ScalarField3& o) const
{
    return dims == o.dims && box.min == o.box.min && box.max == o.box.max;
}

void ScalarField3::validate() const
{
    require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, ErrorCode::InvalidArgument, "field dims must be positive");
    require(box.valid(), ErrorCode::InvalidArgument, "field box min must be < max");
    require(values.size() == size(), ErrorCode::SizeMismatch, "field value count != nx*ny*nz");
}

double trilinear_sample(const ScalarField3& field, const Vec3& p)
{
    require(field.box.contains(p), ErrorCode::OutOfDomain, "trilinear_sample point outside field box");
    const Vec3 h = field.spacing();
    int i0[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
        const int n = field.dims[a];
        double g = (p[a] - field.box.min[a]) / h[a] - 0.5;
        g = std::clamp(g, 0.0, static_cast<double>(n - 1));
        int i = static_cast<int>(std::floor(g));
        if (i >= n - 1) {
            i = std::max(n - 2, 0);
        }
        i0[a] = i;
        t[a] = n == 1 ? 0.0 : g - i;
    }
    auto idx = [&](int a, int o) { return std::min(i0[a] + o, field.dims[a] - 1); };
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? t[2] : 1.0 - t[2];
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? t[1] : 1.0 - t[1];
            for (int dx = 0; dx < 2; ++dx) {
                const double wx = dx ? t[0] : 1.0 - t[0];
                acc += wx * wy * wz * field.at(idx(0, dx), idx(1, dy), idx(2, dz));
            }
        }
    }
    return acc;
}

} // namespace hsdf
