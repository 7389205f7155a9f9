#include "hsdf/geom/types.hpp"

#include <algorithm>
#include <cmath>

namespace hsdf {

bool RigidPose::valid(double tol) const
{
    const Mat3 rtr = rotation.transpose() * rotation;
    if (((rtr - Mat3::Identity()).array().abs() > tol).any()) {
        return false;
    }
    return std::abs(rotation.determinant() - 1.0) <= tol && scale > 0.0 && translation.allFinite();
}

RigidPose RigidPose::from_axis_angle(const Vec3& axis_angle, const Vec3& translation, double scale)
{
    RigidPose pose;
    pose.rotation = rotation_from_axis_angle(axis_angle);
    pose.translation = translation;
    pose.scale = scale;
    return pose;
}

Mat3 rotation_from_axis_angle(const Vec3& axis_angle)
{
    const double angle = axis_angle.norm();
    if (angle < 1e-300) {
        return Mat3::Identity();
    }
    return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

double rotation_angle_between(const Mat3& a, const Mat3& b)
{
    const Mat3 rel = a.transpose() * b;
    const double c = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

Mat3 rotation_yaw_pitch_roll(double yaw_rad, double pitch_rad, double roll_rad)
{
    const Mat3 ry = Eigen::AngleAxisd(yaw_rad, Vec3::UnitY()).toRotationMatrix();
    const Mat3 rx = Eigen::AngleAxisd(pitch_rad, Vec3::UnitX()).toRotationMatrix();
    const Mat3 rz = Eigen::AngleAxisd(roll_rad, Vec3::UnitZ()).toRotationMatrix();
    return rz * rx * ry;
}

} // namespace hsdf
