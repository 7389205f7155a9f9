#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/field.hpp"
#include "hsdf/geom/image.hpp"
#include "hsdf/geom/mesh.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hsdf::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_obj(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const fs::path& path);

void write_ply(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const fs::path& path);

/// Dispatches on extension (.obj / .ply).
void write_mesh(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh read_mesh(const fs::path& path);

enum class SdfPrecision { Float32, Float64 };

/// `path` is the JSON header (.sdf); the payload goes to path + ".raw".
void write_sdf(const fs::path& path, const ScalarField3& field, SdfPrecision precision = SdfPrecision::Float32);
ScalarField3 read_sdf(const fs::path& path);

/// Little-endian PFM, 1 or 3 channels.
void write_pfm(const fs::path& path, const Image& img);
Image read_pfm(const fs::path& path);

/// 8-bit PNG, 1 or 3 channels; values in [0,1] are scaled by 255 and rounded.
/// With `raw_labels`, values are written unscaled (integer label images).
void write_png(const fs::path& path, const Image& img, bool raw_labels = false);
Image read_png(const fs::path& path, bool raw_labels = false);

json to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j);
json to_json(const RigidPose& pose);
RigidPose pose_from_json(const json& j);
json to_json(const Camera& camera);
Camera camera_from_json(const json& j);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

std::vector<unsigned char> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const void* data, std::size_t size);

} // namespace hsdf::io
