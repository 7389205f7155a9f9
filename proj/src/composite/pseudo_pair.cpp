#include "hsdf/composite/pseudo_pair.hpp"

#include "hsdf/composite/contour.hpp"
#include "hsdf/composite/poisson.hpp"
#include "hsdf/composite/warp.hpp"
#include "hsdf/geom/error.hpp"

#include <algorithm>
#include <cmath>

namespace hsdf::composite {

std::string to_string(RejectReason r)
{
    switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::IntersectionTooSmall: return "intersection_too_small";
    case RejectReason::HoleTouchesBorder: return "hole_touches_border";
    case RejectReason::MaskTouchesBorder: return "mask_touches_border";
    }
    return "unknown";
}

Image face_region(const Image& labels, const std::vector<int>& face_labels)
{
    Image out(labels.width, labels.height, 1);
    for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
        const int l = static_cast<int>(std::lround(labels.data[p * labels.channels]));
        out.data[p] = std::find(face_labels.begin(), face_labels.end(), l) != face_labels.end() ? 1.0f : 0.0f;
    }
    return out;
}

namespace {

bool touches_border(const Image& m)
{
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const bool edge = x == 0 || y == 0 || x == m.width - 1 || y == m.height - 1;
            if (edge && m.at(x, y) > 0.5f) {
                return true;
            }
        }
    }
    return false;
}

Vec2 centroid(const Image& m)
{
    Vec2 c = Vec2::Zero();
    double n = 0.0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (m.at(x, y) > 0.5f) {
                c += Vec2(x, y);
                n += 1.0;
            }
        }
    }
    return n > 0.0 ? Vec2(c / n) : c;
}

void append_anchors(WarpSpec& spec, int w, int h)
{
    const double xs[3] = {0.0, 0.5 * (w - 1), static_cast<double>(w - 1)};
    const double ys[3] = {0.0, 0.5 * (h - 1), static_cast<double>(h - 1)};
    for (double y : ys) {
        for (double x : xs) {
            if (x == xs[1] && y == ys[1]) {
                continue;
            }
            spec.src_points.emplace_back(x, y);
            spec.dst_points.emplace_back(x, y);
        }
    }
}

} // namespace

PairResult make_pseudo_pair(const Image& wild, const Image& parsing, const RenderedFace& face,
                            const PairOptions& opts)
{
    const auto& render = face.bundle;
    require(wild.width == render.rgb.width && wild.height == render.rgb.height &&
                parsing.width == wild.width && parsing.height == wild.height,
            ErrorCode::SizeMismatch, "wild image, parsing and render must share a size");
    require(wild.channels == render.rgb.channels, ErrorCode::SizeMismatch, "wild and render channel counts differ");
    require(opts.contour_spacing_px > 0, ErrorCode::InvalidArgument, "contour spacing must be positive");

    PairResult res;
    res.gt_mesh = face.mesh;
    res.camera = face.camera;

    const Image wild_face = face_region(parsing, opts.face_labels);
    const Image render_face = face_region(render.labels, opts.face_labels);
    Image inter(wild.width, wild.height, 1);
    Image holes(wild.width, wild.height, 1);
    std::size_t count = 0;
    for (std::size_t p = 0; p < inter.pixel_count(); ++p) {
        const bool in = wild_face.data[p] > 0.5f && render_face.data[p] > 0.5f;
        inter.data[p] = in ? 1.0f : 0.0f;
        holes.data[p] = in && render.mask.data[p] <= 0.5f ? 1.0f : 0.0f;
        count += in ? 1 : 0;
    }
    res.intersection = inter;

    auto reject = [&](RejectReason r) {
        res.accepted = false;
        res.reason = r;
        return res;
    };
    if (static_cast<double>(count) < opts.min_intersection_fraction * static_cast<double>(inter.pixel_count()) ||
        count == 0) {
        return reject(RejectReason::IntersectionTooSmall);
    }
    if (touches_border(inter)) {
        return reject(RejectReason::MaskTouchesBorder);
    }
    if (touches_border(holes)) {
        return reject(RejectReason::HoleTouchesBorder);
    }

    const Image filled = opts.inpainter ? opts.inpainter(render.rgb, holes) : laplacian_inpaint(render.rgb, holes);

    const auto wild_contour = trace_outer_contour(wild_face);
    const auto inter_contour = trace_outer_contour(inter);
    const double len = contour_length(inter_contour);
    const int n_ctrl = std::max(3, static_cast<int>(std::lround(len / opts.contour_spacing_px)));
    const Vec2 origin = centroid(inter);
    WarpSpec spec;
    spec.src_points = resample_contour(wild_contour, n_ctrl, origin);
    spec.dst_points = resample_contour(inter_contour, n_ctrl, origin);
    append_anchors(spec, wild.width, wild.height);
    const Image warped = warp_image(wild, spec);

    res.blend_mask = erode(inter, 1);
    res.blended = poisson_blend(filled, warped, res.blend_mask);
    res.accepted = true;
    return res;
}

} // namespace hsdf::composite
