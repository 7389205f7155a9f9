#pragma once

#include "hsdf/geom/mesh.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hsdf::bench {

enum class MneFormula { NormDiff, OneMinusCos };
enum class Alignment { None, RigidIcp };

struct MetricConfig {
    int cd_samples = 10000;
    std::optional<double> cr_threshold;  // mm; unset = 2 x median GT edge length
    MneFormula mne_formula = MneFormula::NormDiff;
    Alignment alignment = Alignment::None;
    std::uint64_t seed = 0;
    void validate() const;
};

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // barycentric blend of vertex normals, unit length
};

/// Area-weighted samples; the same seed and mesh give the same samples.
SurfaceSamples sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

struct PairMetrics {
    double cd = 0.0;
    double mne = 0.0;
    double cr = 0.0;  // percent
};

/// Symmetric point-sampled Chamfer distance (mm).
double chamfer_distance(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg = {});
double mean_normal_error(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg = {});
double completeness_rate(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg = {});

/// All three from one pair of sample sets. Throws on empty meshes.
PairMetrics evaluate_pair(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg = {});

/// Point-to-point ICP of `pred` onto `gt` (diagnostics only).
TriangleMesh rigid_icp(const TriangleMesh& pred, const TriangleMesh& gt, int iterations = 30,
                       std::uint64_t seed = 0);

struct PoseBucket {
    std::string label;
    double lo = 0.0;
    double hi = 0.0;  // exclusive, except the last bucket
};

std::vector<PoseBucket> default_buckets();

struct BenchPair {
    std::string id;
    std::optional<TriangleMesh> pred;  // nullopt or empty = failed reconstruction
    TriangleMesh gt;
    double pose_deg = 0.0;
};

struct BucketStats {
    PoseBucket bucket;
    int pairs = 0;
    int successes = 0;
    std::optional<PairMetrics> mean;  // absent when no pair succeeded
};

struct BenchmarkReport {
    std::string method = "Ours";
    std::vector<BucketStats> buckets;
    int pairs = 0;
    int successes = 0;
    double success_rate = 0.0;  // percent
    std::vector<std::string> failed_ids;
    std::vector<std::pair<std::string, PairMetrics>> per_pair;
};

BenchmarkReport evaluate_benchmark(const std::vector<BenchPair>& pairs, const MetricConfig& cfg = {},
                                   const std::vector<PoseBucket>& buckets = default_buckets());

/// "1.79 / 0.058 / 99.5", or "---" when absent.
std::string format_cell(const std::optional<PairMetrics>& m);
/// Aligned plain-text table: one header row of bucket labels, one row per
/// report with CD / MNE / CR per bucket and Succ. last.
std::string report_table(const std::vector<BenchmarkReport>& reports);
nlohmann::json to_json(const BenchmarkReport& r);
BenchmarkReport report_from_json(const nlohmann::json& j);

} // namespace hsdf::bench
