#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/image.hpp"
#include "hsdf/geom/mesh.hpp"
#include "hsdf/raster/rasterizer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hsdf::composite {

/// The fitted mesh, its camera and its render.
struct RenderedFace {
    raster::RenderBundle bundle;
    TriangleMesh mesh;
    PerspectiveCamera camera;
};

/// Fills the missing pixels (hole mask > 0.5) of a rendered face. The default
/// is laplacian_inpaint; a learned inpainter can be dropped in here.
using Inpainter = std::function<Image(const Image& face, const Image& hole_mask)>;

struct PairOptions {
    int contour_spacing_px = 16;
    double min_intersection_fraction = 0.01;
    std::vector<int> face_labels{1, 3};
    Inpainter inpainter;  // empty = laplacian_inpaint
};

enum class RejectReason { None, IntersectionTooSmall, HoleTouchesBorder, MaskTouchesBorder };

std::string to_string(RejectReason r);

struct PairResult {
    bool accepted = false;
    RejectReason reason = RejectReason::None;
    Image blended;
    Image blend_mask;
    Image intersection;
    TriangleMesh gt_mesh;
    PerspectiveCamera camera;
};

/// Face-region mask: labels in `face_labels`.
Image face_region(const Image& labels, const std::vector<int>& face_labels);

/// Composites the rendered face into the wild image: intersection of the
/// wild parsing and rendered face regions, inpainting of the render's
/// uncovered pixels inside it, contour-driven TPS warp of the wild image onto
/// the intersection, then Poisson blending. The mesh and camera are passed
/// through untouched.
PairResult make_pseudo_pair(const Image& wild, const Image& parsing, const RenderedFace& face,
                            const PairOptions& opts = {});

} // namespace hsdf::composite
