#pragma once

#include "hsdf/geom/field.hpp"
#include "hsdf/geom/mesh.hpp"
#include "hsdf/geom/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace hsdf::synth {

/// Gaussian bump centred on a point of the base ellipsoid.
struct Bump {
    Vec3 center;
    double radius = 10.0;
    double height = 2.0;
};

/// Head-like analytic shape in its own frame: the face looks along -z and the
/// top of the head is at -y (camera convention, y down).
struct AnalyticShape {
    Vec3 semi_axes{80, 90, 75};
    std::vector<Bump> bumps;

    /// Closest point on the base ellipsoid and its signed distance.
    double ellipsoid_distance(const Vec3& p, Vec3* closest = nullptr) const;
    /// Sum of bump heights at a point of the base ellipsoid.
    double bump_height(const Vec3& on_ellipsoid) const;
    /// Base distance minus the bump height at the foot point: the bumped
    /// surface is the ellipsoid displaced along its normal.
    double sdf(const Vec3& p) const;
    Vec3 ellipsoid_normal(const Vec3& on_ellipsoid) const;
    /// Largest summed bump gradient magnitude over a dense grid on the base
    /// ellipsoid; the SDF is (1 + this)-Lipschitz outside the base ellipsoid.
    double lipschitz_excess() const;

    nlohmann::json to_json() const;
    static AnalyticShape from_json(const nlohmann::json& j);
};

/// Unsigned distance from a point to an axis-aligned ellipsoid with the given
/// semi-axes (robust bisection on the foot-point equation), with the foot point.
double distance_to_ellipsoid(const Vec3& semi_axes, const Vec3& p, Vec3* foot = nullptr);

struct ShapeOptions {
    double min_axis = 60.0;
    double max_axis = 100.0;
    int min_bumps = 3;
    int max_bumps = 10;
    double min_radius = 5.0;
    double max_radius = 20.0;
    double min_height = 1.0;
    double max_height = 5.0;
    double max_slope = 0.3;  // height <= max_slope * radius
    double max_excess = 0.2; // cap on lipschitz_excess(); bumps are moved or lowered to meet it
};

AnalyticShape make_shape(std::uint64_t seed, const ShapeOptions& opts = {});

/// Shared lat-long topology: pole at -y, `rings` latitude rings of `segments`
/// vertices, pole at +y.
struct Tessellation {
    int rings = 40;
    int segments = 80;
};

enum FaceLabel : int { kBackground = 0, kSkin = 1, kHead = 2, kFeature = 3 };

/// Mesh with vertices on the bumped surface (foot point + bump along the
/// normal), mesh vertex normals and per-face labels.
TriangleMesh tessellate(const AnalyticShape& shape, const Tessellation& t = {}, bool with_labels = true);

/// Unit-sphere direction of every tessellation vertex (the parameter domain).
std::vector<Vec3> parameter_directions(const Tessellation& t = {});

/// Region label per face; depends on the topology only.
std::vector<int> face_labels(const Tessellation& t = {});

/// Vertex indices of fixed parameter-domain sites on the front of the head.
std::vector<int> landmark_sites(const Tessellation& t = {});

/// SDF of `shape` after the rigid motion `pose`, sampled at the lattice nodes.
ScalarField3 sample_sdf(const AnalyticShape& shape, const RigidPose& pose, const ScalarField3& lattice);

/// Stable parameter hash.
std::uint64_t shape_hash(const AnalyticShape& shape);

} // namespace hsdf::synth
