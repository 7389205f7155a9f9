#pragma once

#include "hsdf/field/hierarchy.hpp"
#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/field.hpp"
#include "hsdf/geom/image.hpp"
#include "hsdf/geom/mesh.hpp"
#include "hsdf/neural/networks.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>

namespace hsdf::reconstruct {

enum class Levels { Base, BaseFine, BaseFineNorm };

std::string to_string(Levels l);
Levels levels_from_string(const std::string& s);

struct Weights {
    std::optional<neural::ImplicitModel> base;
    std::optional<neural::ImplicitModel> fine;
    std::optional<neural::NormalRegressor> normals;
};

/// Loads base.ckpt / fine.ckpt / normal.ckpt from a directory; missing files
/// leave the level empty.
Weights load_weights(const std::filesystem::path& dir);
void save_weights(const std::filesystem::path& dir, Weights& w);

struct GridConfig {
    std::array<int, 3> dims{128, 128, 128};
    Levels levels = Levels::BaseFineNorm;
    field::CarveGain gain;
    /// Bypass for the regressor: rasterized front/back normal maps.
    std::optional<Image> gt_front_normals;
    std::optional<Image> gt_back_normals;
};

/// Per-level fields before composition, so ablation rows can share one pass.
struct LevelFields {
    ScalarField3 base;
    std::optional<ScalarField3> fine;
    Image front_normals;
    Image back_normals;
};

/// Lattice spanning the camera box.
ScalarField3 camera_lattice(const CropAlignedCamera& camera, const std::array<int, 3>& dims);

LevelFields evaluate_levels(const Weights& w, const Image& rgb, const Image& labels,
                            const CropAlignedCamera& camera, const GridConfig& cfg);
ScalarField3 compose_levels(const LevelFields& f, const CropAlignedCamera& camera, Levels levels,
                            const field::CarveGain& gain);

/// Base head at every voxel centre, plus the fine head and normal carving as
/// enabled, combined by compose_field. Throws if an enabled level has no weights.
ScalarField3 evaluate_grid(const Weights& w, const Image& rgb, const Image& labels, const CropAlignedCamera& camera,
                           const GridConfig& cfg);

struct ReconstructConfig {
    GridConfig grid;
    double iso = 0.0;
    double min_coverage = 0.5;
    bool keep_field = false;
};

struct ReconstructResult {
    TriangleMesh mesh;
    std::optional<ScalarField3> field;
    bool success = false;
    double coverage = 0.0;  // fraction of mask pixels covered by the largest component
};

/// Success: the mesh is non-empty and its largest connected component covers at
/// least `min_coverage` of the mask pixels (labels > 0) in the camera's
/// orthographic view. An empty mask never succeeds.
double mask_coverage(const TriangleMesh& mesh, const Image& labels, const CropAlignedCamera& camera);

ReconstructResult reconstruct_mesh(const ScalarField3& field, const Image& labels, const CropAlignedCamera& camera,
                                   const ReconstructConfig& cfg);
ReconstructResult reconstruct(const Image& rgb, const Image& labels, const Weights& w,
                              const CropAlignedCamera& camera, const ReconstructConfig& cfg);

} // namespace hsdf::reconstruct
