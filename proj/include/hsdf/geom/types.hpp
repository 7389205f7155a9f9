#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hsdf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Box3 {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Ones();

    Vec3 size() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    bool valid() const { return (min.array() < max.array()).all(); }
    bool contains(const Vec3& p) const
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

/// Similarity transform p -> scale * R * p + t. Rotation is kept orthonormal
/// with det +1; mm units for the translation.
struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
    Vec3 apply_inverse(const Vec3& p) const { return rotation.transpose() * (p - translation) / scale; }

    bool valid(double tol = 1e-9) const;

    static RigidPose from_axis_angle(const Vec3& axis_angle, const Vec3& translation = Vec3::Zero(),
                                     double scale = 1.0);
};

/// Rotation matrix for a rotation vector (axis * angle in radians).
Mat3 rotation_from_axis_angle(const Vec3& axis_angle);

/// Geodesic angle in radians between two rotations.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Rotation about the camera's vertical (y) axis followed by pitch about x.
Mat3 rotation_yaw_pitch_roll(double yaw_rad, double pitch_rad, double roll_rad);

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

} // namespace hsdf
