#pragma once

#include "hsdf/geom/types.hpp"

#include <optional>
#include <variant>

namespace hsdf {

/// Pinhole camera looking down +z of its own frame; image v grows with camera y.
/// `pose` maps world points into camera space.
struct PerspectiveCamera {
    double focal = 1.0;  // px
    Vec2 principal = Vec2::Zero();
    RigidPose pose;
    int width = 0;
    int height = 0;
};

/// Linear map of a world box onto the image rectangle: x -> [0,width],
/// y -> [0,height], z -> [-1,1]. The pixel-alignment convention of the
/// implicit networks.
struct CropAlignedCamera {
    Box3 box;
    int width = 0;
    int height = 0;
};

using Camera = std::variant<PerspectiveCamera, CropAlignedCamera>;

struct Projection {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;  // camera-space depth (mm) or normalized depth in [-1,1]
};

bool camera_valid(const Camera& camera);

/// Returns nullopt for points at or behind a perspective camera.
std::optional<Projection> project(const Camera& camera, const Vec3& p);
std::optional<Projection> project(const PerspectiveCamera& camera, const Vec3& p);
Projection project(const CropAlignedCamera& camera, const Vec3& p);

Vec3 unproject(const CropAlignedCamera& camera, double u, double v, double z);

/// World-space ray direction (unit) through image point (u,v).
Vec3 ray_direction(const PerspectiveCamera& camera, double u, double v);
Vec3 camera_center(const PerspectiveCamera& camera);

} // namespace hsdf
