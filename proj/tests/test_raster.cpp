#include "hsdf/geom/mesh.hpp"
#include "hsdf/raster/rasterizer.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>

using namespace hsdf;
using namespace hsdf::raster;

namespace {

// odd size so that pixel (64,64) is centered on the optical axis
PerspectiveCamera axis_camera(double f = 200.0, int size = 129)
{
    PerspectiveCamera c;
    c.focal = f;
    c.principal = Vec2(size / 2.0, size / 2.0);
    c.width = size;
    c.height = size;
    return c;
}

// first positive hit of the ray from the origin along d with a sphere, camera at the origin
double ray_sphere(const Vec3& d, const Vec3& c, double r, bool far)
{
    const double b = d.dot(c);
    const double disc = b * b - (c.squaredNorm() - r * r);
    if (disc < 0) return -1;
    return far ? b + std::sqrt(disc) : b - std::sqrt(disc);
}

} // namespace

TEST_CASE("empty mesh renders background")
{
    const auto b = rasterize(TriangleMesh{}, axis_camera());
    CHECK(b.mask.width == 129);
    for (std::size_t i = 0; i < b.mask.data.size(); ++i) {
        CHECK(b.mask.data[i] == 0.0f);
        CHECK(b.depth.data[i] == 0.0f);
        CHECK(b.labels.data[i] == 0.0f);
    }
    const auto n = render_normal_maps(TriangleMesh{}, axis_camera());
    for (float v : n.front.data) CHECK(v == 0.0f);
}

TEST_CASE("full-screen triangle has planar depth")
{
    const auto cam = axis_camera();
    const double z0 = 500.0;
    TriangleMesh m;
    m.vertices = {Vec3(-5000, -5000, z0), Vec3(5000, -5000, z0), Vec3(0, 5000, z0)};
    m.faces = {{0, 1, 2}};
    const auto b = rasterize(m, cam);
    int covered = 0;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            if (b.mask.at(x, y) > 0) {
                ++covered;
                CHECK(std::abs(b.depth.at(x, y) - z0) <= 1e-4 * z0);
            }
        }
    }
    CHECK(covered == cam.width * cam.height);
}

TEST_CASE("sphere depth and normals against ray casting")
{
    const auto cam = axis_camera();
    const double f = cam.focal;
    const double r = 100.0;
    const Vec3 c(0, 0, 4 * f);
    const auto m = make_icosphere(r, 5, c);
    const auto b = rasterize(m, cam);
    const auto n = render_normal_maps(m, cam);
    const auto back = render_back_depth(m, cam);

    CHECK(b.mask.at(64, 64) == 1.0f);
    CHECK(std::abs(b.depth.at(64, 64) - (4 * f - r)) <= 1e-3 * (4 * f - r));
    CHECK(std::abs(back.at(64, 64) - (4 * f + r)) <= 1e-3 * (4 * f + r));
    CHECK(std::abs(n.front.at(64, 64, 0)) < 1e-3);
    CHECK(std::abs(n.front.at(64, 64, 1)) < 1e-3);
    CHECK(std::abs(n.front.at(64, 64, 2) + 1) < 1e-3);
    CHECK(std::abs(n.back.at(64, 64, 0)) < 1e-3);
    CHECK(std::abs(n.back.at(64, 64, 1)) < 1e-3);
    CHECK(std::abs(n.back.at(64, 64, 2) - 1) < 1e-3);

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> px(0, cam.width - 1);
    int checked = 0;
    double worst = 0.0;
    while (checked < 500) {
        const int x = px(rng);
        const int y = px(rng);
        if (b.mask.at(x, y) == 0) continue;
        const Vec3 d = ray_direction(cam, x + 0.5, y + 0.5);
        const double t = ray_sphere(d, c, r, false);
        // the tessellation silhouette can overhang the true sphere by a sliver
        if (t < 0) continue;
        const Vec3 expect = (t * d - c).normalized();
        const Vec3 got(n.front.at(x, y, 0), n.front.at(x, y, 1), n.front.at(x, y, 2));
        worst = std::max(worst, rad2deg(std::acos(std::clamp(got.normalized().dot(expect), -1.0, 1.0))));
        ++checked;
    }
    CHECK(worst < 2.0);
}

TEST_CASE("render invariants on a labeled closed mesh")
{
    const auto cam = axis_camera(150.0, 96);
    auto m = transformed(make_icosphere(60.0, 3), RigidPose::from_axis_angle(Vec3(0.3, 0.7, 0.1), Vec3(5, -8, 400)));
    m.face_labels.resize(m.faces.size());
    for (std::size_t i = 0; i < m.faces.size(); ++i) m.face_labels[i] = 1 + static_cast<int>(i % 3);
    const auto b = rasterize(m, cam);
    const auto n = render_normal_maps(m, cam);
    const auto back = render_back_depth(m, cam);
    int covered = 0;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const bool in = b.mask.at(x, y) > 0;
            covered += in;
            if (in) {
                CHECK(b.depth.at(x, y) > 0);
                CHECK(b.depth.at(x, y) <= back.at(x, y));
                CHECK(b.labels.at(x, y) >= 1);
                for (const Image* img : {&n.front, &n.back}) {
                    const Vec3 v(img->at(x, y, 0), img->at(x, y, 1), img->at(x, y, 2));
                    CHECK(std::abs(v.norm() - 1) < 1e-4);
                }
            } else {
                CHECK(b.depth.at(x, y) == 0);
                CHECK(back.at(x, y) == 0);
                CHECK(b.labels.at(x, y) == 0);
                CHECK(n.front.at(x, y, 2) == 0);
            }
        }
    }
    CHECK(covered > 100);
}

TEST_CASE("one-pixel principal shift shifts the render by one pixel")
{
    auto cam = axis_camera(150.0, 96);
    const auto m = transformed(make_icosphere(60.0, 3), RigidPose::from_axis_angle(Vec3(0.2, 0.4, 0), Vec3(0, 0, 400)));
    const auto a = rasterize(m, cam);
    cam.principal.x() += 1.0;
    const auto b = rasterize(m, cam);
    int mismatched = 0;
    for (int y = 1; y < cam.height - 1; ++y) {
        for (int x = 1; x < cam.width - 2; ++x) {
            mismatched += a.mask.at(x, y) != b.mask.at(x + 1, y);
            if (a.mask.at(x, y) > 0 && b.mask.at(x + 1, y) > 0) {
                CHECK(std::abs(a.depth.at(x, y) - b.depth.at(x + 1, y)) < 1e-3);
                CHECK(a.labels.at(x, y) == b.labels.at(x + 1, y));
            }
        }
    }
    CHECK(mismatched == 0);
}

TEST_CASE("renders do not depend on the worker count")
{
    const auto cam = axis_camera(150.0, 96);
    const auto m = transformed(make_icosphere(60.0, 3), RigidPose::from_axis_angle(Vec3(0.5, 0.1, 0), Vec3(3, 2, 400)));
    ::setenv("HSDF_THREADS", "1", 1);
    const auto a = rasterize(m, cam);
    const auto na = render_normal_maps(m, cam);
    ::setenv("HSDF_THREADS", "5", 1);
    const auto b = rasterize(m, cam);
    const auto nb = render_normal_maps(m, cam);
    ::unsetenv("HSDF_THREADS");
    CHECK(a.rgb.data == b.rgb.data);
    CHECK(a.depth.data == b.depth.data);
    CHECK(a.labels.data == b.labels.data);
    CHECK(na.front.data == nb.front.data);
    CHECK(na.back.data == nb.back.data);
}

TEST_CASE("hole faces are depth-tested but left empty")
{
    const auto cam = axis_camera();
    TriangleMesh m;
    // a near hole quad in front of a far full-screen plane
    m.vertices = {Vec3(-5000, -5000, 900), Vec3(5000, -5000, 900), Vec3(0, 5000, 900),
                  Vec3(-10, -10, 300), Vec3(10, -10, 300), Vec3(10, 10, 300), Vec3(-10, 10, 300)};
    m.faces = {{0, 1, 2}, {3, 4, 5}, {3, 5, 6}};
    m.face_labels = {1, 7, 7};
    RenderOptions opts;
    opts.hole_label = 7;
    const auto b = rasterize(m, cam, std::nullopt, opts);
    CHECK(b.mask.at(64, 64) == 0.0f);
    CHECK(b.depth.at(64, 64) == 0.0f);
    CHECK(b.labels.at(64, 64) == 7.0f);
    CHECK(b.mask.at(2, 2) == 1.0f);
    CHECK(b.labels.at(2, 2) == 1.0f);
    CHECK(std::abs(b.depth.at(2, 2) - 900) < 0.1);
}

TEST_CASE("flat shading and texture lookup")
{
    const auto cam = axis_camera();
    TriangleMesh m;
    m.vertices = {Vec3(-5000, -5000, 500), Vec3(5000, -5000, 500), Vec3(0, 5000, 500)};
    m.faces = {{0, 1, 2}};
    m.face_labels = {2};
    const auto flat = rasterize(m, cam);
    // face normal is parallel to the view ray at the center pixel
    const Vec3 alb = label_albedo(2);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(flat.rgb.at(64, 64, ch) == doctest::Approx(alb[ch]).epsilon(1e-3));
    }
    m.uvs = {Vec2(0, 0), Vec2(1, 0), Vec2(0.5, 1)};
    Image tex(8, 8, 3, 0.0f);
    for (float& v : tex.data) v = 0.375f;
    const auto textured = rasterize(m, cam, tex);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(std::abs(textured.rgb.at(10, 100, ch) - 0.375f) < 1e-6);
    }
}

TEST_CASE("orthographic coverage of a crop-aligned box")
{
    CropAlignedCamera crop;
    crop.box = Box3{Vec3(-100, -100, -100), Vec3(100, 100, 100)};
    crop.width = 64;
    crop.height = 64;
    const auto mask = coverage_mask(make_icosphere(50.0, 4), crop);
    CHECK(mask.at(32, 32) == 1.0f);
    CHECK(mask.at(2, 2) == 0.0f);
    double area = 0;
    for (float v : mask.data) area += v;
    // disc of radius 16 px
    CHECK(area == doctest::Approx(kPi * 16 * 16).epsilon(0.05));
}
