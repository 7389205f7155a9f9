#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/mesh.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hsdf::morphable {

/// Linear shape model: vertices = mean + id_basis * id + exp_basis * exp.
/// Basis columns have 3V entries (x,y,z interleaved per vertex), mm per unit
/// coefficient, coefficients in standard-deviation units.
struct MorphableModel {
    TriangleMesh mean_shape;
    Eigen::MatrixXd id_basis;   // 3V x K_id
    Eigen::MatrixXd exp_basis;  // 3V x K_exp
    std::vector<int> landmark_indices;
    std::string name;

    int num_vertices() const { return static_cast<int>(mean_shape.vertices.size()); }
    int num_id() const { return static_cast<int>(id_basis.cols()); }
    int num_exp() const { return static_cast<int>(exp_basis.cols()); }

    void validate() const;
};

struct FitParams {
    Eigen::VectorXd id_coeffs;
    Eigen::VectorXd exp_coeffs;
    RigidPose pose;  // model -> world
    PerspectiveCamera camera;
};

/// Zero coefficients sized for `model`, identity pose.
FitParams neutral_params(const MorphableModel& model, const PerspectiveCamera& camera);

TriangleMesh synthesize_shape(const MorphableModel& model, const Eigen::VectorXd& id_coeffs,
                              const Eigen::VectorXd& exp_coeffs);

/// Posed (world-space) mesh for the given parameters.
TriangleMesh posed_shape(const MorphableModel& model, const FitParams& params);

/// Throws Error(BehindCamera) if any landmark is not in front of the camera.
std::vector<Vec2> project_landmarks(const MorphableModel& model, const FitParams& params);

void write_model(const std::filesystem::path& path, const MorphableModel& model);
MorphableModel read_model(const std::filesystem::path& path);

nlohmann::json params_to_json(const FitParams& params);
FitParams params_from_json(const nlohmann::json& j);

nlohmann::json landmarks_to_json(const std::vector<Vec2>& pts);
std::vector<Vec2> landmarks_from_json(const nlohmann::json& j);

} // namespace hsdf::morphable
