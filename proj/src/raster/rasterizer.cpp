#include "hsdf/raster/rasterizer.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace hsdf::raster {

namespace {

struct ScreenVertex {
    double x, y;   // pixel coordinates
    double inv_z;  // 1 / camera-space depth
    Vec3 cam;      // camera-space position
};

struct Fragment {
    int tri = -1;
    double z = 0.0;
    Vec3 bary = Vec3::Zero();  // perspective-corrected
};

struct FragmentBuffers {
    int width = 0;
    int height = 0;
    std::vector<Fragment> near;
    std::vector<Fragment> far;
};

// Edge ownership for the top-left rule, with triangles oriented to positive
// signed area in y-down pixel space. A shared edge is walked in opposite
// directions by its two triangles, so exactly one of them owns it.
bool owns_edge(double dx, double dy) { return dy > 0.0 || (dy == 0.0 && dx < 0.0); }

FragmentBuffers rasterize_fragments(const TriangleMesh& mesh, const std::vector<Vec3>& cam_pts,
                                    const std::vector<Vec2>& screen, int width, int height, bool want_far)
{
    FragmentBuffers fb;
    fb.width = width;
    fb.height = height;
    const std::size_t npix = static_cast<std::size_t>(width) * height;
    fb.near.assign(npix, Fragment{});
    if (want_far) {
        fb.far.assign(npix, Fragment{});
    }
    constexpr double kNear = 1e-6;
    const int nfaces = static_cast<int>(mesh.faces.size());
    const int band_rows = 16;
    const int nbands = (height + band_rows - 1) / band_rows;

    parallel_for(static_cast<std::size_t>(nbands), [&](std::size_t b0, std::size_t b1) {
        for (std::size_t band = b0; band < b1; ++band) {
            const int row0 = static_cast<int>(band) * band_rows;
            const int row1 = std::min(height, row0 + band_rows);
            for (int f = 0; f < nfaces; ++f) {
                const Face& t = mesh.faces[f];
                ScreenVertex v[3];
                bool ok = true;
                for (int c = 0; c < 3; ++c) {
                    const Vec3& q = cam_pts[t[c]];
                    if (!(q.z() > kNear)) {
                        ok = false;
                        break;
                    }
                    v[c] = {screen[t[c]].x(), screen[t[c]].y(), 1.0 / q.z(), q};
                }
                if (!ok) {
                    continue;
                }
                double area = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[1].y - v[0].y) * (v[2].x - v[0].x);
                if (area == 0.0 || !std::isfinite(area)) {
                    continue;
                }
                int order[3] = {0, 1, 2};
                if (area < 0.0) {
                    std::swap(order[1], order[2]);
                    area = -area;
                }
                const ScreenVertex& a = v[order[0]];
                const ScreenVertex& b = v[order[1]];
                const ScreenVertex& c = v[order[2]];
                const double minx = std::min({a.x, b.x, c.x});
                const double maxx = std::max({a.x, b.x, c.x});
                const double miny = std::min({a.y, b.y, c.y});
                const double maxy = std::max({a.y, b.y, c.y});
                const int px0 = std::max(0, static_cast<int>(std::floor(minx - 0.5)));
                const int px1 = std::min(width - 1, static_cast<int>(std::ceil(maxx - 0.5)));
                const int py0 = std::max(row0, static_cast<int>(std::floor(miny - 0.5)));
                const int py1 = std::min(row1 - 1, static_cast<int>(std::ceil(maxy - 0.5)));
                if (px0 > px1 || py0 > py1) {
                    continue;
                }
                const ScreenVertex* verts[3] = {&a, &b, &c};
                for (int py = py0; py <= py1; ++py) {
                    const double sy = py + 0.5;
                    for (int px = px0; px <= px1; ++px) {
                        const double sx = px + 0.5;
                        double w[3];
                        bool inside = true;
                        for (int e = 0; e < 3; ++e) {
                            const ScreenVertex& p0 = *verts[(e + 1) % 3];
                            const ScreenVertex& p1 = *verts[(e + 2) % 3];
                            const double dx = p1.x - p0.x;
                            const double dy = p1.y - p0.y;
                            // edge function of the edge opposite vertex e
                            w[e] = dx * (sy - p0.y) - dy * (sx - p0.x);
                            if (w[e] < 0.0 || (w[e] == 0.0 && !owns_edge(dx, dy))) {
                                inside = false;
                                break;
                            }
                        }
                        if (!inside) {
                            continue;
                        }
                        // screen-space barycentrics -> perspective-correct
                        double l[3];
                        double inv_z = 0.0;
                        for (int e = 0; e < 3; ++e) {
                            l[e] = w[e] / area;
                            inv_z += l[e] * verts[e]->inv_z;
                        }
                        const double z = 1.0 / inv_z;
                        Vec3 bary_sorted(l[0] * verts[0]->inv_z * z, l[1] * verts[1]->inv_z * z,
                                         l[2] * verts[2]->inv_z * z);
                        Vec3 bary;
                        for (int e = 0; e < 3; ++e) {
                            bary[order[e]] = bary_sorted[e];
                        }
                        const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                        Fragment& n = fb.near[pix];
                        if (n.tri < 0 || z < n.z) {
                            n = Fragment{f, z, bary};
                        }
                        if (want_far) {
                            Fragment& fr = fb.far[pix];
                            if (fr.tri < 0 || z > fr.z) {
                                fr = Fragment{f, z, bary};
                            }
                        }
                    }
                }
            }
        }
    });
    return fb;
}

struct Prepared {
    std::vector<Vec3> cam;
    std::vector<Vec2> screen;
};

Prepared prepare(const TriangleMesh& mesh, const PerspectiveCamera& camera)
{
    Prepared p;
    p.cam.resize(mesh.vertices.size());
    p.screen.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 q = camera.pose.apply(mesh.vertices[i]);
        p.cam[i] = q;
        if (q.z() > 0.0) {
            p.screen[i] = Vec2(camera.principal.x() + camera.focal * q.x() / q.z(),
                               camera.principal.y() + camera.focal * q.y() / q.z());
        } else {
            p.screen[i] = Vec2::Zero();
        }
    }
    return p;
}

void check_camera(const PerspectiveCamera& camera)
{
    require(camera.focal > 0.0, ErrorCode::InvalidArgument, "focal length must be positive");
    require(camera.width > 0 && camera.height > 0, ErrorCode::InvalidArgument, "camera image size must be set");
}

std::vector<Vec3> camera_normals(const TriangleMesh& mesh, const PerspectiveCamera& camera)
{
    std::vector<Vec3> n = mesh.normals.empty() ? mesh_vertex_normals(mesh) : mesh.normals;
    for (Vec3& v : n) {
        v = camera.pose.rotation * v;
    }
    return n;
}

Vec3 interpolate_normal(const TriangleMesh& mesh, const std::vector<Vec3>& normals, const Fragment& frag)
{
    const Face& t = mesh.faces[frag.tri];
    Vec3 n = frag.bary[0] * normals[t[0]] + frag.bary[1] * normals[t[1]] + frag.bary[2] * normals[t[2]];
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

int face_label(const TriangleMesh& mesh, int tri) { return mesh.face_labels.empty() ? 0 : mesh.face_labels[tri]; }

} // namespace

Vec3 label_albedo(int label)
{
    switch (label) {
    case 1: return {0.86, 0.66, 0.56};
    case 2: return {0.35, 0.27, 0.22};
    case 3: return {0.12, 0.10, 0.10};
    default: return {0.6, 0.6, 0.6};
    }
}

RenderBundle rasterize(const TriangleMesh& mesh, const PerspectiveCamera& camera, const std::optional<Image>& texture,
                       const RenderOptions& opts)
{
    check_camera(camera);
    const int w = camera.width;
    const int h = camera.height;
    RenderBundle out{Image(w, h, 3), Image(w, h, 1), Image(w, h, 1), Image(w, h, 1)};
    if (mesh.faces.empty()) {
        return out;
    }
    const Prepared prep = prepare(mesh, camera);
    const FragmentBuffers fb = rasterize_fragments(mesh, prep.cam, prep.screen, w, h, false);
    const bool use_texture = texture.has_value() && mesh.uvs.size() == mesh.vertices.size();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Fragment& fr = fb.near[static_cast<std::size_t>(y) * w + x];
            if (fr.tri < 0) {
                continue;
            }
            const int label = face_label(mesh, fr.tri);
            out.labels.at(x, y) = static_cast<float>(label);
            if (label == opts.hole_label) {
                continue;
            }
            out.mask.at(x, y) = 1.0f;
            out.depth.at(x, y) = static_cast<float>(fr.z);
            const Face& t = mesh.faces[fr.tri];
            Vec3 color;
            if (use_texture) {
                const Vec2 uv = fr.bary[0] * mesh.uvs[t[0]] + fr.bary[1] * mesh.uvs[t[1]] + fr.bary[2] * mesh.uvs[t[2]];
                const auto c = bilinear_sample(*texture, uv.x() * (texture->width - 1), (1.0 - uv.y()) * (texture->height - 1));
                color = Vec3(c[0], c[c.size() > 1 ? 1 : 0], c[c.size() > 2 ? 2 : 0]);
            } else {
                const Vec3 fn = (prep.cam[t[1]] - prep.cam[t[0]]).cross(prep.cam[t[2]] - prep.cam[t[0]]).normalized();
                const Vec3 view = Vec3((x + 0.5 - camera.principal.x()) / camera.focal,
                                       (y + 0.5 - camera.principal.y()) / camera.focal, 1.0)
                                      .normalized();
                const double facing = std::abs(fn.dot(view));
                color = label_albedo(label) * (opts.ambient + (1.0 - opts.ambient) * facing);
            }
            for (int c = 0; c < 3; ++c) {
                out.rgb.at(x, y, c) = static_cast<float>(std::clamp(color[c], 0.0, 1.0));
            }
        }
    }
    return out;
}

NormalMaps render_normal_maps(const TriangleMesh& mesh, const PerspectiveCamera& camera, const RenderOptions& opts)
{
    check_camera(camera);
    const int w = camera.width;
    const int h = camera.height;
    NormalMaps out{Image(w, h, 3), Image(w, h, 3)};
    if (mesh.faces.empty()) {
        return out;
    }
    const Prepared prep = prepare(mesh, camera);
    const FragmentBuffers fb = rasterize_fragments(mesh, prep.cam, prep.screen, w, h, true);
    const std::vector<Vec3> normals = camera_normals(mesh, camera);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            const Fragment& nf = fb.near[pix];
            if (nf.tri < 0 || face_label(mesh, nf.tri) == opts.hole_label) {
                continue;
            }
            const Vec3 fn = interpolate_normal(mesh, normals, nf);
            const Vec3 bn = interpolate_normal(mesh, normals, fb.far[pix]);
            for (int c = 0; c < 3; ++c) {
                out.front.at(x, y, c) = static_cast<float>(fn[c]);
                out.back.at(x, y, c) = static_cast<float>(bn[c]);
            }
        }
    }
    // float storage: renormalize so stored pixels are unit to float precision
    for (Image* img : {&out.front, &out.back}) {
        for (std::size_t p = 0; p < img->pixel_count(); ++p) {
            float* px = img->data.data() + 3 * p;
            const double len = std::sqrt(double(px[0]) * px[0] + double(px[1]) * px[1] + double(px[2]) * px[2]);
            if (len > 0) {
                for (int c = 0; c < 3; ++c) {
                    px[c] = static_cast<float>(px[c] / len);
                }
            }
        }
    }
    return out;
}

Image render_back_depth(const TriangleMesh& mesh, const PerspectiveCamera& camera)
{
    check_camera(camera);
    Image out(camera.width, camera.height, 1);
    if (mesh.faces.empty()) {
        return out;
    }
    const Prepared prep = prepare(mesh, camera);
    const FragmentBuffers fb = rasterize_fragments(mesh, prep.cam, prep.screen, camera.width, camera.height, true);
    for (std::size_t p = 0; p < fb.far.size(); ++p) {
        if (fb.far[p].tri >= 0) {
            out.data[p] = static_cast<float>(fb.far[p].z);
        }
    }
    return out;
}

Image coverage_mask(const TriangleMesh& mesh, const CropAlignedCamera& camera)
{
    // Orthographic: pretend every point sits at unit depth.
    std::vector<Vec3> cam_pts(mesh.vertices.size());
    std::vector<Vec2> screen(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Projection pr = project(camera, mesh.vertices[i]);
        screen[i] = Vec2(pr.u, pr.v);
        cam_pts[i] = Vec3(pr.u, pr.v, 1.0);
    }
    Image out(camera.width, camera.height, 1);
    if (mesh.faces.empty()) {
        return out;
    }
    const FragmentBuffers fb = rasterize_fragments(mesh, cam_pts, screen, camera.width, camera.height, false);
    for (std::size_t p = 0; p < fb.near.size(); ++p) {
        out.data[p] = fb.near[p].tri >= 0 ? 1.0f : 0.0f;
    }
    return out;
}

} // namespace hsdf::raster
