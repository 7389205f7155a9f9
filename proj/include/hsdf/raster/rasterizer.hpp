#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/image.hpp"
#include "hsdf/geom/mesh.hpp"

#include <optional>

namespace hsdf::raster {

struct RenderOptions {
    // Faces with this label take part in the depth test and report their label,
    // but leave rgb, depth and mask empty (mesh holes such as eyes or mouth).
    int hole_label = -1;
    // Flat shading: albedo(label) * (ambient + (1 - ambient) * |n_face . view|).
    double ambient = 0.25;
};

struct RenderBundle {
    Image rgb;     // 3 channels
    Image depth;   // camera-space z (mm), 0 = background
    Image mask;    // 1 where covered
    Image labels;  // per-face region id of the visible face, 0 = background
};

struct NormalMaps {
    Image front;  // camera-space unit normals of the nearest surface
    Image back;   // camera-space unit normals of the farthest surface
};

/// Z-buffered perspective rasterization; pixel centers at (x+0.5, y+0.5),
/// top-left fill rule, no culling. Image size comes from the camera.
RenderBundle rasterize(const TriangleMesh& mesh, const PerspectiveCamera& camera,
                       const std::optional<Image>& texture = std::nullopt, const RenderOptions& opts = {});

NormalMaps render_normal_maps(const TriangleMesh& mesh, const PerspectiveCamera& camera,
                              const RenderOptions& opts = {});

/// Depth of the farthest surface per pixel (0 = background).
Image render_back_depth(const TriangleMesh& mesh, const PerspectiveCamera& camera);

/// Orthographic coverage of the mesh in a crop-aligned frame (1 = covered).
Image coverage_mask(const TriangleMesh& mesh, const CropAlignedCamera& camera);

/// Flat-shading albedo used for a face label.
Vec3 label_albedo(int label);

} // namespace hsdf::raster
