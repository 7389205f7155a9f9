#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/field.hpp"
#include "hsdf/morphable/model.hpp"
#include "hsdf/neural/train.hpp"
#include "hsdf/raster/rasterizer.hpp"
#include "hsdf/synth/shape.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hsdf::synth {

/// Seed of the `index`-th derived stream (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// PCA identity basis over `n_shapes` seeded shapes on the shared topology, plus
/// `k_exp` hand-built expression fields. Shape i is make_shape(mix_seed(seed, i)).
/// Basis columns are scaled to one standard deviation per unit coefficient;
/// identical shapes give zero columns.
morphable::MorphableModel make_synthetic_3dmm(int n_shapes, int k_id, std::uint64_t seed, int k_exp = 4,
                                              const Tessellation& t = {}, const ShapeOptions& shape = {});

struct DatasetConfig {
    int n_train = 200;
    int n_test = 40;
    int image_size = 128;
    int grid = 128;
    double box_mm = 240.0;
    double camera_distance_mm = 50000.0;
    std::uint64_t seed = 0;
    // weights of the pose buckets 0-5, 5-30, 30-60, 60-90 degrees
    std::array<double, 4> bucket_weights{0.25, 0.38, 0.25, 0.12};
    Tessellation tessellation;
    ShapeOptions shape;

    int total() const { return n_train + n_test; }
    void validate() const;
};

nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j, DatasetConfig base = {});

struct Sample {
    std::string id;
    std::string split;
    AnalyticShape shape;
    RigidPose pose;  // shape frame -> camera space
    double pose_deg = 0.0;
    TriangleMesh mesh;  // camera space
    PerspectiveCamera camera;
    CropAlignedCamera crop;
    raster::RenderBundle render;
    raster::NormalMaps normals;
    ScalarField3 sdf;
    Image back_depth;
    std::vector<Vec2> landmarks;
};

/// Crop box centred on the object, `box_mm` on a side.
CropAlignedCamera crop_camera(const DatasetConfig& c);
/// Far perspective camera whose image plane matches the crop box at its centre.
PerspectiveCamera view_camera(const DatasetConfig& c);

/// Draws a pose angle from the bucket weights (uniform inside a bucket), with
/// the rotation axis near the vertical.
RigidPose sample_pose(std::mt19937_64& rng, const DatasetConfig& c, double* angle_deg);

Sample make_sample(const DatasetConfig& c, int index);
void write_sample(const std::filesystem::path& dir, const Sample& s);

/// Writes `<out>/pairs/<id>/...` and `<out>/manifest.json`.
void build_dataset(const std::filesystem::path& out, const DatasetConfig& c);

struct ManifestEntry {
    std::string id;
    std::string split;
    double pose_deg = 0.0;
};
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dataset);

/// Signed distance to a closed, outward-wound mesh at the lattice nodes. The
/// closest point is searched among the faces around the nearest vertex; the
/// sign comes from the face normal (or vertex normal at edges and corners).
ScalarField3 mesh_sdf(const TriangleMesh& mesh, const ScalarField3& lattice);

/// Loads the training view of one sample directory.
neural::TrainSample load_training_sample(const std::filesystem::path& sample_dir);

} // namespace hsdf::synth
