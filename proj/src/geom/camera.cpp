#include "hsdf/geom/camera.hpp"

namespace hsdf {

bool camera_valid(const Camera& camera)
{
    if (const auto* p = std::get_if<PerspectiveCamera>(&camera)) {
        return p->focal > 0.0 && p->pose.valid(1e-9);
    }
    const auto& c = std::get<CropAlignedCamera>(camera);
    return c.box.valid() && c.width > 0 && c.height > 0;
}

std::optional<Projection> project(const PerspectiveCamera& cam, const Vec3& p)
{
    const Vec3 q = cam.pose.apply(p);
    if (!(q.z() > 0.0)) {
        return std::nullopt;
    }
    return Projection{cam.principal.x() + cam.focal * q.x() / q.z(),
                      cam.principal.y() + cam.focal * q.y() / q.z(), q.z()};
}

Projection project(const CropAlignedCamera& cam, const Vec3& p)
{
    const Vec3 t = (p - cam.box.min).cwiseQuotient(cam.box.size());
    return Projection{t.x() * cam.width, t.y() * cam.height, 2.0 * t.z() - 1.0};
}

std::optional<Projection> project(const Camera& camera, const Vec3& p)
{
    if (const auto* pc = std::get_if<PerspectiveCamera>(&camera)) {
        return project(*pc, p);
    }
    return project(std::get<CropAlignedCamera>(camera), p);
}

Vec3 unproject(const CropAlignedCamera& cam, double u, double v, double z)
{
    const Vec3 t(u / cam.width, v / cam.height, 0.5 * (z + 1.0));
    return cam.box.min + t.cwiseProduct(cam.box.size());
}

Vec3 camera_center(const PerspectiveCamera& cam)
{
    return cam.pose.apply_inverse(Vec3::Zero());
}

Vec3 ray_direction(const PerspectiveCamera& cam, double u, double v)
{
    const Vec3 dir_cam((u - cam.principal.x()) / cam.focal, (v - cam.principal.y()) / cam.focal, 1.0);
    return (cam.pose.rotation.transpose() * dir_cam).normalized();
}

} // namespace hsdf
