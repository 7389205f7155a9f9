#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/field.hpp"
#include "hsdf/geom/image.hpp"
#include "hsdf/neural/networks.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace hsdf::neural {

struct TrainBatch {
    Image image;   // RGB
    Image labels;  // semantic labels, 0 = background
    CropAlignedCamera camera;
    std::vector<Vec3> points;
    std::vector<double> targets;  // millimetres
    double unit = 1.0;            // millimetres per network output unit
    double clamp = 5.0;           // in network units
};

/// Mean L1 between the head output and clamp(target / unit, +-clamp). Parameter
/// gradients are accumulated into the model (call zero_grad first). An empty
/// point set gives 0.
double loss_and_grad(ImplicitModel& model, const TrainBatch& batch, bool accumulate_grad = true);

/// Central-difference check over every parameter. Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, floor). When a probe
/// crosses a leaky-ReLU or L1 kink the step is shrunk tenfold (up to 3 times).
double grad_check(ImplicitModel& model, const TrainBatch& batch, double eps = 1e-4, double floor = 1e-6);

struct PointSamples {
    std::vector<Vec3> points;
    std::vector<double> values;
    bool no_surface = false;  // no zero crossing: everything was drawn uniformly
};

/// Half the points are zero crossings of `surface` perturbed by N(0, sigma^2)
/// (mm), half are uniform in the box. Values are trilinear samples of `target`.
PointSamples sample_training_points(const ScalarField3& surface, const ScalarField3& target, int n, double sigma,
                                    std::mt19937_64& rng);
PointSamples sample_training_points(const ScalarField3& field, int n, double sigma, std::mt19937_64& rng);

/// One training image with its ground truth.
struct TrainSample {
    Image image;
    Image labels;
    CropAlignedCamera camera;
    ScalarField3 sdf;  // mm
    Image front_normals;
    Image back_normals;
};

enum class TargetKind { Base, Fine };

struct TrainConfig {
    int epochs = 50;
    int batch_images = 4;
    int points_per_image = 2048;
    int pool_per_image = 16384;
    double lr = 1e-3;
    double momentum = 0.9;
    double clamp_voxels = 5.0;
    double sigma_voxels = 1.5;
    int mean_kernel = 5;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Called after every epoch with the epoch index (from 0).
using EpochCallback = std::function<void(int epoch)>;

/// SGD with momentum on the clamped-L1 loss. Returns the per-step mean loss.
/// Throws Error(NonFinite) if the loss becomes NaN or infinite.
std::vector<double> train_implicit(ImplicitModel& model, const std::vector<TrainSample>& data, TargetKind target,
                                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// L1 on the six normal channels over covered pixels.
double normal_loss_and_grad(NormalRegressor& net, const TrainSample& s, bool accumulate_grad = true);
double grad_check(NormalRegressor& net, const TrainSample& s, double eps = 1e-4, double floor = 1e-6);
std::vector<double> train_normals(NormalRegressor& net, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch = {});

/// SGD loop on a fixed batch with the learning rate decayed linearly to zero;
/// used for the memorization check.
std::vector<double> overfit_batch(ImplicitModel& model, const TrainBatch& batch, int steps, double lr,
                                  double momentum);

/// JSON header + raw float32 payload at `path` and `path + ".raw"`.
void write_checkpoint(const std::filesystem::path& path, ImplicitModel& model);
ImplicitModel read_implicit_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, NormalRegressor& net);
NormalRegressor read_normal_checkpoint(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses);

} // namespace hsdf::neural
