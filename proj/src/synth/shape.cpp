#include "hsdf/synth/shape.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"
#include "hsdf/geom/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

namespace hsdf::synth {

namespace {

double robust_length(double a, double b)
{
    const double m = std::max(std::abs(a), std::abs(b));
    if (m == 0.0) {
        return 0.0;
    }
    return m * std::hypot(a / m, b / m);
}

double robust_length(double a, double b, double c)
{
    const double m = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (m == 0.0) {
        return 0.0;
    }
    const double x = a / m;
    const double y = b / m;
    const double z = c / m;
    return m * std::sqrt(x * x + y * y + z * z);
}

double root2(double r0, double z0, double z1, double g)
{
    const double n0 = r0 * z0;
    double s0 = z1 - 1.0;
    double s1 = g < 0.0 ? 0.0 : robust_length(n0, z1) - 1.0;
    double s = 0.0;
    for (int i = 0; i < 2000; ++i) {
        s = 0.5 * (s0 + s1);
        if (s == s0 || s == s1) {
            break;
        }
        const double a = n0 / (s + r0);
        const double b = z1 / (s + 1.0);
        const double gs = a * a + b * b - 1.0;
        if (gs > 0.0) {
            s0 = s;
        } else if (gs < 0.0) {
            s1 = s;
        } else {
            break;
        }
    }
    return s;
}

double root3(double r0, double r1, double z0, double z1, double z2, double g)
{
    const double n0 = r0 * z0;
    const double n1 = r1 * z1;
    double s0 = z2 - 1.0;
    double s1 = g < 0.0 ? 0.0 : robust_length(n0, n1, z2) - 1.0;
    double s = 0.0;
    for (int i = 0; i < 2000; ++i) {
        s = 0.5 * (s0 + s1);
        if (s == s0 || s == s1) {
            break;
        }
        const double a = n0 / (s + r0);
        const double b = n1 / (s + r1);
        const double c = z2 / (s + 1.0);
        const double gs = a * a + b * b + c * c - 1.0;
        if (gs > 0.0) {
            s0 = s;
        } else if (gs < 0.0) {
            s1 = s;
        } else {
            break;
        }
    }
    return s;
}

// Foot point on an ellipse with e0 >= e1, query in the first quadrant.
double ellipse_foot(double e0, double e1, double y0, double y1, double& x0, double& x1)
{
    if (y1 > 0.0) {
        if (y0 > 0.0) {
            const double z0 = y0 / e0;
            const double z1 = y1 / e1;
            const double g = z0 * z0 + z1 * z1 - 1.0;
            if (g != 0.0) {
                const double r0 = (e0 / e1) * (e0 / e1);
                const double s = root2(r0, z0, z1, g);
                x0 = r0 * y0 / (s + r0);
                x1 = y1 / (s + 1.0);
            } else {
                x0 = y0;
                x1 = y1;
            }
        } else {
            x0 = 0.0;
            x1 = e1;
        }
    } else {
        const double numer = e0 * y0;
        const double denom = e0 * e0 - e1 * e1;
        if (numer < denom) {
            const double xde = numer / denom;
            x0 = e0 * xde;
            x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xde * xde));
        } else {
            x0 = e0;
            x1 = 0.0;
        }
    }
    return std::hypot(x0 - y0, x1 - y1);
}

// Foot point on an ellipsoid with e0 >= e1 >= e2, query in the first octant.
void ellipsoid_foot(const double e[3], const double y[3], double x[3])
{
    if (y[2] > 0.0) {
        if (y[1] > 0.0) {
            if (y[0] > 0.0) {
                const double z0 = y[0] / e[0];
                const double z1 = y[1] / e[1];
                const double z2 = y[2] / e[2];
                const double g = z0 * z0 + z1 * z1 + z2 * z2 - 1.0;
                if (g != 0.0) {
                    const double r0 = (e[0] / e[2]) * (e[0] / e[2]);
                    const double r1 = (e[1] / e[2]) * (e[1] / e[2]);
                    const double s = root3(r0, r1, z0, z1, z2, g);
                    x[0] = r0 * y[0] / (s + r0);
                    x[1] = r1 * y[1] / (s + r1);
                    x[2] = y[2] / (s + 1.0);
                } else {
                    x[0] = y[0];
                    x[1] = y[1];
                    x[2] = y[2];
                }
            } else {
                x[0] = 0.0;
                ellipse_foot(e[1], e[2], y[1], y[2], x[1], x[2]);
            }
        } else {
            x[1] = 0.0;
            if (y[0] > 0.0) {
                ellipse_foot(e[0], e[2], y[0], y[2], x[0], x[2]);
            } else {
                x[0] = 0.0;
                x[2] = e[2];
            }
        }
        return;
    }
    const double d0 = e[0] * e[0] - e[2] * e[2];
    const double d1 = e[1] * e[1] - e[2] * e[2];
    const double n0 = e[0] * y[0];
    const double n1 = e[1] * y[1];
    if (n0 < d0 && n1 < d1) {
        const double a = n0 / d0;
        const double b = n1 / d1;
        const double disc = 1.0 - a * a - b * b;
        if (disc > 0.0) {
            x[0] = e[0] * a;
            x[1] = e[1] * b;
            x[2] = e[2] * std::sqrt(disc);
            return;
        }
    }
    x[2] = 0.0;
    ellipse_foot(e[0], e[1], y[0], y[1], x[0], x[1]);
}

} // namespace

double distance_to_ellipsoid(const Vec3& semi_axes, const Vec3& p, Vec3* foot)
{
    // sort axes descending, fold the query into the first octant
    std::array<int, 3> perm{0, 1, 2};
    std::sort(perm.begin(), perm.end(), [&](int a, int b) { return semi_axes[a] > semi_axes[b]; });
    double e[3];
    double y[3];
    double x[3];
    for (int i = 0; i < 3; ++i) {
        e[i] = semi_axes[perm[i]];
        y[i] = std::abs(p[perm[i]]);
    }
    ellipsoid_foot(e, y, x);
    Vec3 f;
    for (int i = 0; i < 3; ++i) {
        f[perm[i]] = std::copysign(x[i], p[perm[i]]);
    }
    if (foot) {
        *foot = f;
    }
    return (p - f).norm();
}

double AnalyticShape::ellipsoid_distance(const Vec3& p, Vec3* closest) const
{
    const double d = distance_to_ellipsoid(semi_axes, p, closest);
    const double g = (p.array() / semi_axes.array()).square().sum();
    return g < 1.0 ? -d : d;
}

double AnalyticShape::bump_height(const Vec3& q) const
{
    double h = 0.0;
    for (const auto& b : bumps) {
        h += b.height * std::exp(-(q - b.center).squaredNorm() / (2.0 * b.radius * b.radius));
    }
    return h;
}

double AnalyticShape::sdf(const Vec3& p) const
{
    Vec3 q;
    const double d = ellipsoid_distance(p, &q);
    return d - bump_height(q);
}

Vec3 AnalyticShape::ellipsoid_normal(const Vec3& q) const
{
    return Vec3(q.x() / (semi_axes.x() * semi_axes.x()), q.y() / (semi_axes.y() * semi_axes.y()),
                q.z() / (semi_axes.z() * semi_axes.z()))
        .normalized();
}

namespace {

// gradient magnitude of one bump's height at a point
double bump_slope(const Bump& b, const Vec3& q)
{
    const double t = (q - b.center).norm() / b.radius;
    return b.height / b.radius * t * std::exp(-0.5 * t * t);
}

// base-ellipsoid points on a 128 x 256 latitude-longitude grid
std::vector<Vec3> slope_probes(const Vec3& a)
{
    constexpr int kRings = 128;
    constexpr int kSegments = 256;
    std::vector<Vec3> out;
    out.reserve(kRings * kSegments);
    for (int r = 0; r < kRings; ++r) {
        const double theta = kPi * (r + 0.5) / kRings;
        for (int s = 0; s < kSegments; ++s) {
            const double phi = 2.0 * kPi * s / kSegments;
            out.emplace_back(a.x() * std::sin(theta) * std::sin(phi), -a.y() * std::cos(theta),
                             -a.z() * std::sin(theta) * std::cos(phi));
        }
    }
    return out;
}

} // namespace

double AnalyticShape::lipschitz_excess() const
{
    double worst = 0.0;
    for (const Vec3& q : slope_probes(semi_axes)) {
        double sum = 0.0;
        for (const auto& b : bumps) {
            sum += bump_slope(b, q);
        }
        worst = std::max(worst, sum);
    }
    return worst;
}

nlohmann::json AnalyticShape::to_json() const
{
    nlohmann::json j;
    j["semi_axes"] = io::to_json(semi_axes);
    auto& arr = j["bumps"] = nlohmann::json::array();
    for (const auto& b : bumps) {
        arr.push_back({{"center", io::to_json(b.center)}, {"radius", b.radius}, {"height", b.height}});
    }
    return j;
}

AnalyticShape AnalyticShape::from_json(const nlohmann::json& j)
{
    AnalyticShape s;
    s.semi_axes = io::vec3_from_json(j.at("semi_axes"));
    for (const auto& b : j.at("bumps")) {
        s.bumps.push_back({io::vec3_from_json(b.at("center")), b.at("radius").get<double>(), b.at("height").get<double>()});
    }
    return s;
}

AnalyticShape make_shape(std::uint64_t seed, const ShapeOptions& o)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto lerp = [&](double a, double b) { return a + (b - a) * u(rng); };
    AnalyticShape s;
    s.semi_axes = Vec3(lerp(o.min_axis, o.max_axis), lerp(o.min_axis, o.max_axis), lerp(o.min_axis, o.max_axis));
    const int n = o.min_bumps + static_cast<int>(u(rng) * (o.max_bumps - o.min_bumps + 1));
    std::normal_distribution<double> g(0.0, 1.0);
    const auto probes = slope_probes(s.semi_axes);
    std::vector<double> slope(probes.size(), 0.0);
    auto peak_with = [&](const Bump& b) {
        double worst = 0.0;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            worst = std::max(worst, slope[i] + bump_slope(b, probes[i]));
        }
        return worst;
    };
    for (int i = 0; i < std::min(n, o.max_bumps); ++i) {
        Bump b;
        b.radius = lerp(o.min_radius, o.max_radius);
        b.height = std::min(lerp(o.min_height, o.max_height), o.max_slope * b.radius);
        // redraw the centre while the summed slope would pass the cap, then
        // keep the best centre and lower the height until it fits
        Bump best = b;
        double best_peak = std::numeric_limits<double>::infinity();
        for (int attempt = 0; attempt < 32 && best_peak > o.max_excess; ++attempt) {
            Vec3 dir(g(rng), g(rng), g(rng));
            // favour the visible front hemisphere (-z)
            dir.z() = -std::abs(dir.z());
            dir.normalize();
            // radial projection of the direction onto the ellipsoid
            const double t = 1.0 / std::sqrt((dir.array() / s.semi_axes.array()).square().sum());
            b.center = t * dir;
            const double peak = peak_with(b);
            if (peak < best_peak) {
                best = b;
                best_peak = peak;
            }
        }
        while (best_peak > o.max_excess && best.height > 1e-3) {
            best.height *= 0.9;
            best_peak = peak_with(best);
        }
        for (std::size_t p = 0; p < probes.size(); ++p) {
            slope[p] += bump_slope(best, probes[p]);
        }
        s.bumps.push_back(best);
    }
    return s;
}

namespace {

Vec3 param_point(const Vec3& a, double theta, double phi)
{
    // theta from the top of the head (-y); phi = 0 faces the camera (-z)
    return Vec3(a.x() * std::sin(theta) * std::sin(phi), -a.y() * std::cos(theta),
                -a.z() * std::sin(theta) * std::cos(phi));
}

struct Site {
    double theta;
    double phi;
};

// eyes, nose, mouth corners and a few contour points in parameter space
const Site kFeatureSites[] = {{1.25, -0.35}, {1.25, 0.35}, {1.85, 0.0}};
const double kFeatureRadius = 0.16;
const Site kLandmarkSites[] = {{1.25, -0.35}, {1.25, 0.35}, {1.20, -0.6}, {1.20, 0.6}, {1.55, 0.0},
                               {1.85, -0.25}, {1.85, 0.25}, {1.85, 0.0},  {2.2, 0.0},   {1.6, -0.9},
                               {1.6, 0.9},    {0.9, 0.0}};

int nearest_grid_vertex(const Tessellation& t, double theta, double phi)
{
    const int ring = std::clamp(static_cast<int>(std::lround(theta / kPi * (t.rings + 1))) - 1, 0, t.rings - 1);
    double p = phi / (2.0 * kPi);
    p -= std::floor(p);
    const int seg = static_cast<int>(std::lround(p * t.segments)) % t.segments;
    return 1 + ring * t.segments + seg;
}

} // namespace

std::vector<Vec3> parameter_directions(const Tessellation& t)
{
    const Vec3 unit(1, 1, 1);
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<std::size_t>(t.rings) * t.segments + 2);
    dirs.push_back(param_point(unit, 0.0, 0.0));
    for (int r = 0; r < t.rings; ++r) {
        for (int s = 0; s < t.segments; ++s) {
            dirs.push_back(param_point(unit, kPi * (r + 1) / (t.rings + 1), 2.0 * kPi * s / t.segments));
        }
    }
    dirs.push_back(param_point(unit, kPi, 0.0));
    return dirs;
}

std::vector<int> face_labels(const Tessellation& t)
{
    const auto dirs = parameter_directions(t);
    const auto faces = tessellate(AnalyticShape{Vec3(1, 1, 1), {}}, t, false).faces;
    std::vector<int> labels(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Vec3 c = (dirs[faces[f][0]] + dirs[faces[f][1]] + dirs[faces[f][2]]).normalized();
        const double theta = std::acos(std::clamp(-c.y(), -1.0, 1.0));
        const double phi = std::atan2(c.x(), -c.z());
        int label = kHead;
        if (std::abs(phi) < 1.0 && theta > 0.8 && theta < 2.4) {
            label = kSkin;
        }
        for (const auto& site : kFeatureSites) {
            if (std::hypot(theta - site.theta, phi - site.phi) < kFeatureRadius) {
                label = kFeature;
            }
        }
        labels[f] = label;
    }
    return labels;
}

TriangleMesh tessellate(const AnalyticShape& shape, const Tessellation& t, bool with_labels)
{
    require(t.rings >= 2 && t.segments >= 3, ErrorCode::InvalidArgument, "tessellation too coarse");
    TriangleMesh m;
    auto add_vertex = [&](double theta, double phi) {
        const Vec3 q = param_point(shape.semi_axes, theta, phi);
        const Vec3 n = shape.ellipsoid_normal(q);
        m.vertices.push_back(q + shape.bump_height(q) * n);
    };
    add_vertex(0.0, 0.0);
    for (int r = 0; r < t.rings; ++r) {
        const double theta = kPi * (r + 1) / (t.rings + 1);
        for (int s = 0; s < t.segments; ++s) {
            add_vertex(theta, 2.0 * kPi * s / t.segments);
        }
    }
    add_vertex(kPi, 0.0);
    const int bottom = static_cast<int>(m.vertices.size()) - 1;
    auto ring_vertex = [&](int r, int s) { return 1 + r * t.segments + (s % t.segments); };
    // winding chosen so cross products point outward
    for (int s = 0; s < t.segments; ++s) {
        m.faces.push_back({0, ring_vertex(0, s), ring_vertex(0, s + 1)});
    }
    for (int r = 0; r + 1 < t.rings; ++r) {
        for (int s = 0; s < t.segments; ++s) {
            const int a = ring_vertex(r, s);
            const int b = ring_vertex(r, s + 1);
            const int c = ring_vertex(r + 1, s);
            const int d = ring_vertex(r + 1, s + 1);
            m.faces.push_back({a, d, b});
            m.faces.push_back({a, c, d});
        }
    }
    for (int s = 0; s < t.segments; ++s) {
        m.faces.push_back({bottom, ring_vertex(t.rings - 1, s + 1), ring_vertex(t.rings - 1, s)});
    }
    if (!with_labels) {
        return m;
    }
    m.face_labels = face_labels(t);
    // analytic normals of the displaced surface are close to the mesh normals;
    // use the mesh normals so rendered normal maps match the geometry exactly
    m.normals = mesh_vertex_normals(m);
    return m;
}

std::vector<int> landmark_sites(const Tessellation& t)
{
    std::vector<int> out;
    for (const auto& s : kLandmarkSites) {
        out.push_back(nearest_grid_vertex(t, s.theta, s.phi));
    }
    return out;
}

ScalarField3 sample_sdf(const AnalyticShape& shape, const RigidPose& pose, const ScalarField3& lattice)
{
    ScalarField3 f = lattice;
    const std::size_t n = f.size();
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t idx = b; idx < e; ++idx) {
            const int i = static_cast<int>(idx % f.dims[0]);
            const int j = static_cast<int>((idx / f.dims[0]) % f.dims[1]);
            const int k = static_cast<int>(idx / (static_cast<std::size_t>(f.dims[0]) * f.dims[1]));
            f.values[idx] = shape.sdf(pose.apply_inverse(f.node_position(i, j, k))) * pose.scale;
        }
    });
    return f;
}

std::uint64_t shape_hash(const AnalyticShape& shape)
{
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (int a = 0; a < 3; ++a) {
        mix(shape.semi_axes[a]);
    }
    for (const auto& b : shape.bumps) {
        for (int a = 0; a < 3; ++a) {
            mix(b.center[a]);
        }
        mix(b.radius);
        mix(b.height);
    }
    return h;
}

} // namespace hsdf::synth
