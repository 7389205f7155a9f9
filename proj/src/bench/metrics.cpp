#include "hsdf/bench/metrics.hpp"

#include "hsdf/bench/kdtree.hpp"
#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace hsdf::bench {

void MetricConfig::validate() const
{
    require(cd_samples > 0, ErrorCode::InvalidArgument, "cd_samples must be positive");
    require(!cr_threshold || *cr_threshold > 0.0, ErrorCode::InvalidArgument, "cr_threshold must be positive");
}

SurfaceSamples sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed)
{
    require(!mesh.faces.empty(), ErrorCode::InvalidArgument, "cannot sample an empty mesh");
    require(count > 0, ErrorCode::InvalidArgument, "sample count must be positive");
    const std::vector<Vec3> vn = mesh.normals.size() == mesh.vertices.size() ? mesh.normals : mesh_vertex_normals(mesh);
    std::vector<double> cum(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        total += 0.5 * face_cross(mesh, static_cast<int>(f)).norm();
        cum[f] = total;
    }
    require(total > 0.0, ErrorCode::InvalidArgument, "mesh has zero area");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SurfaceSamples s;
    s.points.reserve(count);
    s.normals.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double r = u(rng) * total;
        const std::size_t f = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin()), cum.size() - 1);
        const double r1 = std::sqrt(u(rng));
        const double r2 = u(rng);
        const double a = 1.0 - r1;
        const double b = r1 * (1.0 - r2);
        const double c = r1 * r2;
        const auto& t = mesh.faces[f];
        s.points.push_back(a * mesh.vertices[t[0]] + b * mesh.vertices[t[1]] + c * mesh.vertices[t[2]]);
        Vec3 n = a * vn[t[0]] + b * vn[t[1]] + c * vn[t[2]];
        if (n.norm() < 1e-12) {
            n = face_cross(mesh, static_cast<int>(f));
        }
        s.normals.push_back(n.normalized());
    }
    return s;
}

namespace {

double mean_distance(const std::vector<Nearest>& nn)
{
    double s = 0.0;
    for (const auto& n : nn) {
        s += n.distance;
    }
    return s / static_cast<double>(nn.size());
}

double normal_error(const Vec3& a, const Vec3& b, MneFormula f)
{
    return f == MneFormula::NormDiff ? (a - b).norm() : 1.0 - a.dot(b);
}

struct SampledPair {
    SurfaceSamples pred;
    SurfaceSamples gt;
    std::vector<Nearest> pred_to_gt;
    std::vector<Nearest> gt_to_pred;
};

SampledPair sample_pair(const TriangleMesh& pred_in, const TriangleMesh& gt, const MetricConfig& cfg)
{
    cfg.validate();
    require(!pred_in.faces.empty() && !gt.faces.empty(), ErrorCode::InvalidArgument,
            "metrics need two non-empty meshes");
    const TriangleMesh pred = cfg.alignment == Alignment::RigidIcp ? rigid_icp(pred_in, gt, 30, cfg.seed) : pred_in;
    SampledPair s;
    s.pred = sample_surface(pred, cfg.cd_samples, cfg.seed);
    s.gt = sample_surface(gt, cfg.cd_samples, cfg.seed);
    s.pred_to_gt = nearest_neighbor(s.gt.points, s.pred.points);
    s.gt_to_pred = nearest_neighbor(s.pred.points, s.gt.points);
    return s;
}

double cr_threshold(const TriangleMesh& gt, const MetricConfig& cfg)
{
    return cfg.cr_threshold ? *cfg.cr_threshold : 2.0 * median_edge_length(gt);
}

PairMetrics metrics_from(const SampledPair& s, double threshold, MneFormula formula)
{
    PairMetrics m;
    m.cd = 0.5 * (mean_distance(s.pred_to_gt) + mean_distance(s.gt_to_pred));
    double mne = 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < s.gt_to_pred.size(); ++i) {
        const auto& nn = s.gt_to_pred[i];
        mne += normal_error(s.pred.normals[nn.index], s.gt.normals[i], formula);
        covered += nn.distance < threshold ? 1 : 0;
    }
    m.mne = mne / static_cast<double>(s.gt_to_pred.size());
    m.cr = 100.0 * static_cast<double>(covered) / static_cast<double>(s.gt_to_pred.size());
    return m;
}

} // namespace

PairMetrics evaluate_pair(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg)
{
    return metrics_from(sample_pair(pred, gt, cfg), cr_threshold(gt, cfg), cfg.mne_formula);
}

double chamfer_distance(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg)
{
    return evaluate_pair(pred, gt, cfg).cd;
}

double mean_normal_error(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg)
{
    return evaluate_pair(pred, gt, cfg).mne;
}

double completeness_rate(const TriangleMesh& pred, const TriangleMesh& gt, const MetricConfig& cfg)
{
    return evaluate_pair(pred, gt, cfg).cr;
}

TriangleMesh rigid_icp(const TriangleMesh& pred, const TriangleMesh& gt, int iterations, std::uint64_t seed)
{
    const auto ref = sample_surface(gt, 4000, seed + 7);
    const KdTree tree(ref.points);
    TriangleMesh out = pred;
    for (int it = 0; it < iterations; ++it) {
        const auto src = sample_surface(out, 2000, seed + 11);
        Vec3 cs = Vec3::Zero();
        Vec3 cd = Vec3::Zero();
        std::vector<Vec3> matched(src.points.size());
        for (std::size_t i = 0; i < src.points.size(); ++i) {
            matched[i] = ref.points[tree.nearest(src.points[i]).index];
            cs += src.points[i];
            cd += matched[i];
        }
        cs /= static_cast<double>(src.points.size());
        cd /= static_cast<double>(src.points.size());
        Mat3 h = Mat3::Zero();
        for (std::size_t i = 0; i < src.points.size(); ++i) {
            h += (src.points[i] - cs) * (matched[i] - cd).transpose();
        }
        Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 d = Mat3::Identity();
        d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
        const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
        const Vec3 t = cd - r * cs;
        for (auto& v : out.vertices) {
            v = r * v + t;
        }
        if (!out.normals.empty()) {
            for (auto& n : out.normals) {
                n = r * n;
            }
        }
    }
    return out;
}

std::vector<PoseBucket> default_buckets()
{
    return {{"0°–5°", 0, 5}, {"5°–30°", 5, 30}, {"30°–60°", 30, 60}, {"60°–90°", 60, 90}};
}

BenchmarkReport evaluate_benchmark(const std::vector<BenchPair>& pairs, const MetricConfig& cfg,
                                   const std::vector<PoseBucket>& buckets)
{
    require(!pairs.empty(), ErrorCode::InvalidArgument, "benchmark needs at least one pair");
    require(!buckets.empty(), ErrorCode::InvalidArgument, "benchmark needs at least one pose bucket");
    cfg.validate();
    std::vector<std::optional<PairMetrics>> metrics(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& p = pairs[i];
            if (p.pred && !p.pred->faces.empty()) {
                metrics[i] = evaluate_pair(*p.pred, p.gt, cfg);
            }
        }
    });
    BenchmarkReport r;
    r.pairs = static_cast<int>(pairs.size());
    std::vector<PairMetrics> sums(buckets.size());
    for (const auto& b : buckets) {
        r.buckets.push_back({b, 0, 0, std::nullopt});
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double a = std::abs(pairs[i].pose_deg);
        std::size_t slot = buckets.size() - 1;
        for (std::size_t b = 0; b < buckets.size(); ++b) {
            if (a >= buckets[b].lo && a < buckets[b].hi) {
                slot = b;
                break;
            }
        }
        auto& bs = r.buckets[slot];
        ++bs.pairs;
        if (metrics[i]) {
            ++bs.successes;
            ++r.successes;
            sums[slot].cd += metrics[i]->cd;
            sums[slot].mne += metrics[i]->mne;
            sums[slot].cr += metrics[i]->cr;
            r.per_pair.emplace_back(pairs[i].id, *metrics[i]);
        } else {
            r.failed_ids.push_back(pairs[i].id);
        }
    }
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        auto& bs = r.buckets[b];
        if (bs.successes > 0) {
            const double n = bs.successes;
            bs.mean = PairMetrics{sums[b].cd / n, sums[b].mne / n, sums[b].cr / n};
        }
    }
    r.success_rate = 100.0 * r.successes / r.pairs;
    return r;
}

std::string format_cell(const std::optional<PairMetrics>& m)
{
    if (!m) {
        return "---";
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.2f / %.3f / %.1f", m->cd, m->mne, m->cr);
    return buf;
}

namespace {

// Display width of UTF-8 text: continuation bytes take no column.
std::size_t columns(const std::string& s)
{
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

} // namespace

std::string report_table(const std::vector<BenchmarkReport>& reports)
{
    require(!reports.empty(), ErrorCode::InvalidArgument, "no reports to format");
    const auto& head = reports.front().buckets;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Pose Angle ->"};
    for (const auto& b : head) {
        header.push_back(b.bucket.label + " (CD / MNE / CR)");
    }
    header.push_back("Succ.");
    rows.push_back(header);
    for (const auto& r : reports) {
        std::vector<std::string> row{r.method};
        for (const auto& b : r.buckets) {
            row.push_back(format_cell(b.mean));
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", r.success_rate);
        row.push_back(buf);
        rows.push_back(row);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
            width[c] = std::max(width[c], columns(row[c]));
        }
    }
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) {
                out += std::string(width[c] - columns(row[c]) + 2, ' ');
            }
        }
        out += '\n';
    }
    return out;
}

nlohmann::json to_json(const BenchmarkReport& r)
{
    nlohmann::json j;
    j["method"] = r.method;
    j["pairs"] = r.pairs;
    j["successes"] = r.successes;
    j["success_rate"] = r.success_rate;
    j["failed"] = r.failed_ids;
    auto& buckets = j["buckets"] = nlohmann::json::array();
    for (const auto& b : r.buckets) {
        nlohmann::json e{{"label", b.bucket.label}, {"lo", b.bucket.lo}, {"hi", b.bucket.hi},
                         {"pairs", b.pairs},        {"successes", b.successes}};
        if (b.mean) {
            e["cd"] = b.mean->cd;
            e["mne"] = b.mean->mne;
            e["cr"] = b.mean->cr;
        } else {
            e["cd"] = e["mne"] = e["cr"] = nullptr;
        }
        buckets.push_back(e);
    }
    auto& pp = j["per_pair"] = nlohmann::json::array();
    for (const auto& [id, m] : r.per_pair) {
        pp.push_back({{"id", id}, {"cd", m.cd}, {"mne", m.mne}, {"cr", m.cr}});
    }
    return j;
}

BenchmarkReport report_from_json(const nlohmann::json& j)
{
    BenchmarkReport r;
    r.method = j.value("method", "Ours");
    r.pairs = j.at("pairs").get<int>();
    r.successes = j.at("successes").get<int>();
    r.success_rate = j.at("success_rate").get<double>();
    r.failed_ids = j.value("failed", std::vector<std::string>{});
    for (const auto& e : j.at("buckets")) {
        BucketStats b;
        b.bucket = {e.at("label").get<std::string>(), e.at("lo").get<double>(), e.at("hi").get<double>()};
        b.pairs = e.at("pairs").get<int>();
        b.successes = e.at("successes").get<int>();
        if (!e.at("cd").is_null()) {
            b.mean = PairMetrics{e.at("cd").get<double>(), e.at("mne").get<double>(), e.at("cr").get<double>()};
        }
        r.buckets.push_back(b);
    }
    for (const auto& e : j.value("per_pair", nlohmann::json::array())) {
        r.per_pair.emplace_back(e.at("id").get<std::string>(),
                                PairMetrics{e.at("cd").get<double>(), e.at("mne").get<double>(), e.at("cr").get<double>()});
    }
    return r;
}

} // namespace hsdf::bench
