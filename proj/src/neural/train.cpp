#include "hsdf/neural/train.hpp"

#include "hsdf/field/hierarchy.hpp"
#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <cstring>
#include <numeric>

namespace hsdf::neural {

namespace {

struct ForwardState {
    FeatureExtractor::Cache ex_cache;
    Tensor features;
    std::vector<BilinearTap> taps;
    RowMatrix x;
};

void build_queries(const Tensor& features, const TrainBatch& b, ForwardState& st)
{
    const double sx = static_cast<double>(b.camera.width) / features.w;
    const double sy = static_cast<double>(b.camera.height) / features.h;
    const Eigen::Index n = static_cast<Eigen::Index>(b.points.size());
    st.taps.resize(b.points.size());
    st.x.resize(n, features.c + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        require(b.camera.box.contains(b.points[i]), ErrorCode::OutOfDomain, "training point outside the camera box");
        const Projection p = project(b.camera, b.points[i]);
        st.taps[i] = bilinear_tap(features, p.u / sx - 0.5, p.v / sy - 0.5);
        bilinear_gather(features, st.taps[i], st.x.row(i).data());
        st.x(i, features.c) = p.z;
    }
}

double clamped_target(const TrainBatch& b, std::size_t i)
{
    return std::clamp(b.targets[i] / b.unit, -b.clamp, b.clamp);
}

double head_loss(const ImplicitHead& head, const TrainBatch& b, const RowMatrix& x)
{
    const RowMatrix y = head.forward(x);
    double loss = 0.0;
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        loss += std::abs(y(static_cast<Eigen::Index>(i), 0) - clamped_target(b, i));
    }
    return loss / static_cast<double>(b.points.size());
}

double relative_error(double a, double n, double floor)
{
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

double sign(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

void sgd_step(std::vector<ParamRef>& params, std::vector<std::vector<double>>& velocity, double lr, double momentum,
              double grad_scale)
{
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& v = velocity[p];
        for (std::size_t i = 0; i < params[p].size; ++i) {
            v[i] = momentum * v[i] - lr * grad_scale * params[p].grad[i];
            params[p].value[i] += v[i];
        }
    }
}

std::vector<std::vector<double>> zero_velocity(const std::vector<ParamRef>& params)
{
    std::vector<std::vector<double>> v;
    for (const auto& p : params) {
        v.emplace_back(p.size, 0.0);
    }
    return v;
}

void check_finite(double loss, std::size_t step)
{
    require(std::isfinite(loss), ErrorCode::NonFinite,
            "training loss became non-finite at step " + std::to_string(step) + " (learning rate too high?)");
}

} // namespace

double loss_and_grad(ImplicitModel& model, const TrainBatch& b, bool accumulate_grad)
{
    require(b.points.size() == b.targets.size(), ErrorCode::SizeMismatch, "points and targets differ in count");
    require(b.unit > 0.0 && b.clamp > 0.0, ErrorCode::InvalidArgument, "batch unit and clamp must be positive");
    if (b.points.empty()) {
        return 0.0;
    }
    ForwardState st;
    st.features = model.extractor.forward(make_input(b.image, b.labels), accumulate_grad ? &st.ex_cache : nullptr);
    build_queries(st.features, b, st);
    ImplicitHead::Cache hc;
    const RowMatrix y = model.head.forward(st.x, accumulate_grad ? &hc : nullptr);
    const double n = static_cast<double>(b.points.size());
    RowMatrix g(y.rows(), 1);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double r = y(i, 0) - clamped_target(b, static_cast<std::size_t>(i));
        loss += std::abs(r);
        g(i, 0) = sign(r) / n;
    }
    if (accumulate_grad) {
        const RowMatrix gx = model.head.backward(hc, g);
        Tensor gf(st.features.c, st.features.h, st.features.w);
        for (Eigen::Index i = 0; i < gx.rows(); ++i) {
            bilinear_scatter(gf, st.taps[i], gx.row(i).data());
        }
        model.extractor.backward(st.ex_cache, gf);
    }
    return loss / n;
}

namespace {

// FNV-1a over the sign pattern of every kink the loss passes through:
// hidden pre-activations and residuals.
struct KinkHash {
    std::uint64_t h = 1469598103934665603ULL;
    void add(bool bit)
    {
        h ^= bit ? 1u : 0u;
        h *= 1099511628211ULL;
    }
    void add(const double* v, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) {
            add(v[i] < 0.0);
        }
    }
};

struct Probe {
    double loss;
    std::uint64_t kinks;
};

Probe probe_head(const ImplicitHead& head, const TrainBatch& b, const RowMatrix& x, KinkHash hash)
{
    ImplicitHead::Cache hc;
    const RowMatrix y = head.forward(x, &hc);
    for (const auto& pre : hc.pre) {
        hash.add(pre.data(), pre.size());
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        const double r = y(static_cast<Eigen::Index>(i), 0) - clamped_target(b, i);
        hash.add(r < 0.0);
        loss += std::abs(r);
    }
    return {loss / static_cast<double>(b.points.size()), hash.h};
}

Probe probe_model(const ImplicitModel& model, const TrainBatch& b)
{
    ForwardState st;
    st.features = model.extractor.forward(make_input(b.image, b.labels), &st.ex_cache);
    build_queries(st.features, b, st);
    KinkHash hash;
    for (const auto& pre : st.ex_cache.pre) {
        hash.add(pre.data.data(), pre.data.size());
    }
    return probe_head(model.head, b, st.x, hash);
}

// Central difference that shrinks the step while the +-eps probes land on a
// different side of any kink than the unperturbed point.
template <class F>
double central_difference(double& value, double eps, std::uint64_t base_kinks, F&& probe)
{
    const double orig = value;
    double numeric = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt, eps *= 0.1) {
        value = orig + eps;
        const Probe lp = probe();
        value = orig - eps;
        const Probe lm = probe();
        value = orig;
        numeric = (lp.loss - lm.loss) / (2 * eps);
        if (lp.kinks == base_kinks && lm.kinks == base_kinks) {
            break;
        }
    }
    return numeric;
}

} // namespace

double grad_check(ImplicitModel& model, const TrainBatch& b, double eps, double floor)
{
    if (b.points.empty()) {
        return 0.0;
    }
    model.zero_grad();
    loss_and_grad(model, b, true);
    const std::uint64_t base = probe_model(model, b).kinks;
    std::vector<ParamRef> ex_params;
    model.extractor.params(ex_params);
    std::vector<ParamRef> head_params;
    model.head.params(head_params);

    double worst = 0.0;
    for (auto& p : ex_params) {
        for (std::size_t i = 0; i < p.size; ++i) {
            const double n = central_difference(p.value[i], eps, base, [&] { return probe_model(model, b); });
            worst = std::max(worst, relative_error(p.grad[i], n, floor));
        }
    }
    // head perturbations leave the features untouched
    ForwardState st;
    st.features = model.extractor.forward(make_input(b.image, b.labels), &st.ex_cache);
    build_queries(st.features, b, st);
    KinkHash ex_hash;
    for (const auto& pre : st.ex_cache.pre) {
        ex_hash.add(pre.data.data(), pre.data.size());
    }
    for (auto& p : head_params) {
        for (std::size_t i = 0; i < p.size; ++i) {
            const double n =
                central_difference(p.value[i], eps, base, [&] { return probe_head(model.head, b, st.x, ex_hash); });
            worst = std::max(worst, relative_error(p.grad[i], n, floor));
        }
    }
    return worst;
}

PointSamples sample_training_points(const ScalarField3& surface, const ScalarField3& target, int n, double sigma,
                                    std::mt19937_64& rng)
{
    require(n > 0, ErrorCode::InvalidArgument, "sample count must be positive");
    require(sigma >= 0.0, ErrorCode::InvalidArgument, "sigma must be non-negative");
    require(surface.box.min == target.box.min && surface.box.max == target.box.max, ErrorCode::SizeMismatch,
            "surface and target fields must share a box");
    std::vector<Vec3> crossings;
    const auto& d = surface.dims;
    for (int k = 0; k < d[2]; ++k) {
        for (int j = 0; j < d[1]; ++j) {
            for (int i = 0; i < d[0]; ++i) {
                const double a = surface.at(i, j, k);
                const int nb[3][3] = {{i + 1, j, k}, {i, j + 1, k}, {i, j, k + 1}};
                for (const auto& q : nb) {
                    if (q[0] >= d[0] || q[1] >= d[1] || q[2] >= d[2]) {
                        continue;
                    }
                    const double c = surface.at(q[0], q[1], q[2]);
                    if ((a < 0.0) != (c < 0.0)) {
                        const double t = a / (a - c);
                        const Vec3 p0 = surface.node_position(i, j, k);
                        const Vec3 p1 = surface.node_position(q[0], q[1], q[2]);
                        crossings.push_back(p0 + t * (p1 - p0));
                    }
                }
            }
        }
    }
    PointSamples out;
    out.no_surface = crossings.empty();
    const int n_surface = out.no_surface ? 0 : n / 2;
    const Box3& box = surface.box;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, crossings.empty() ? 0 : crossings.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto inside = [&](Vec3 p) {
        for (int a = 0; a < 3; ++a) {
            p[a] = std::clamp(p[a], box.min[a], box.max[a]);
        }
        return p;
    };
    out.points.reserve(n);
    for (int s = 0; s < n_surface; ++s) {
        Vec3 p = crossings[pick(rng)];
        if (sigma > 0.0) {
            p += sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
        }
        out.points.push_back(inside(p));
    }
    for (int s = n_surface; s < n; ++s) {
        const double x = unit(rng);
        const double y = unit(rng);
        const double z = unit(rng);
        out.points.push_back(box.min + Vec3(x, y, z).cwiseProduct(box.size()));
    }
    out.values.reserve(n);
    for (const auto& p : out.points) {
        out.values.push_back(trilinear_sample(target, p));
    }
    return out;
}

PointSamples sample_training_points(const ScalarField3& field, int n, double sigma, std::mt19937_64& rng)
{
    return sample_training_points(field, field, n, sigma, rng);
}

nlohmann::json to_json(const TrainConfig& c)
{
    return {{"epochs", c.epochs},
            {"batch_images", c.batch_images},
            {"points_per_image", c.points_per_image},
            {"pool_per_image", c.pool_per_image},
            {"lr", c.lr},
            {"momentum", c.momentum},
            {"clamp_voxels", c.clamp_voxels},
            {"sigma_voxels", c.sigma_voxels},
            {"mean_kernel", c.mean_kernel},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c)
{
    c.epochs = j.value("epochs", c.epochs);
    c.batch_images = j.value("batch_images", c.batch_images);
    c.points_per_image = j.value("points_per_image", c.points_per_image);
    c.pool_per_image = j.value("pool_per_image", c.pool_per_image);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.clamp_voxels = j.value("clamp_voxels", c.clamp_voxels);
    c.sigma_voxels = j.value("sigma_voxels", c.sigma_voxels);
    c.mean_kernel = j.value("mean_kernel", c.mean_kernel);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::vector<double> train_implicit(ImplicitModel& model, const std::vector<TrainSample>& data, TargetKind target,
                                   const TrainConfig& cfg, const EpochCallback& on_epoch)
{
    require(!data.empty(), ErrorCode::InvalidArgument, "training set is empty");
    require(cfg.batch_images > 0 && cfg.points_per_image > 0 && cfg.pool_per_image > 0 && cfg.epochs >= 0,
            ErrorCode::InvalidArgument, "bad training configuration");
    const double unit = data.front().sdf.spacing().minCoeff();
    model.output_scale = unit;

    std::mt19937_64 rng(cfg.seed);
    std::vector<PointSamples> pools;
    pools.reserve(data.size());
    for (const auto& s : data) {
        std::mt19937_64 prng(rng());
        if (target == TargetKind::Base) {
            pools.push_back(sample_training_points(s.sdf, cfg.pool_per_image, cfg.sigma_voxels * unit, prng));
        } else {
            const ScalarField3 hp = field::highpass_target(s.sdf, field::MeanKernel{cfg.mean_kernel});
            pools.push_back(sample_training_points(s.sdf, hp, cfg.pool_per_image, cfg.sigma_voxels * unit, prng));
        }
    }

    auto params = model.params();
    auto velocity = zero_velocity(params);
    std::vector<double> losses;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(cfg.pool_per_image) - 1);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_images) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_images);
            model.zero_grad();
            double loss = 0.0;
            for (std::size_t o = start; o < end; ++o) {
                const auto& s = data[order[o]];
                const auto& pool = pools[order[o]];
                TrainBatch b{s.image, s.labels, s.camera, {}, {}, unit, cfg.clamp_voxels};
                b.points.reserve(cfg.points_per_image);
                b.targets.reserve(cfg.points_per_image);
                for (int q = 0; q < cfg.points_per_image; ++q) {
                    const std::size_t idx = pick(rng);
                    b.points.push_back(pool.points[idx]);
                    b.targets.push_back(pool.values[idx]);
                }
                loss += loss_and_grad(model, b, true);
            }
            const double count = static_cast<double>(end - start);
            loss /= count;
            check_finite(loss, losses.size());
            losses.push_back(loss);
            sgd_step(params, velocity, cfg.lr, cfg.momentum, 1.0 / count);
        }
        if (on_epoch) {
            on_epoch(epoch);
        }
    }
    return losses;
}

double normal_loss_and_grad(NormalRegressor& net, const TrainSample& s, bool accumulate_grad)
{
    NormalRegressor::Cache cache;
    const Tensor y = net.forward(make_input(s.image, s.labels), accumulate_grad ? &cache : nullptr);
    std::size_t covered = 0;
    for (std::size_t p = 0; p < s.labels.pixel_count(); ++p) {
        covered += s.labels.data[p * s.labels.channels] > 0.5f ? 1 : 0;
    }
    if (covered == 0) {
        return 0.0;
    }
    const double n = static_cast<double>(covered * 6);
    Tensor g(6, y.h, y.w);
    double loss = 0.0;
    for (int v = 0; v < y.h; ++v) {
        for (int u = 0; u < y.w; ++u) {
            if (s.labels.at(u, v) <= 0.5f) {
                continue;
            }
            for (int c = 0; c < 6; ++c) {
                const Image& gt = c < 3 ? s.front_normals : s.back_normals;
                const double r = y.at(c, v, u) - gt.at(u, v, c % 3);
                loss += std::abs(r);
                g.at(c, v, u) = sign(r) / n;
            }
        }
    }
    if (accumulate_grad) {
        net.backward(cache, g);
    }
    return loss / n;
}

std::vector<double> train_normals(NormalRegressor& net, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch)
{
    require(!data.empty(), ErrorCode::InvalidArgument, "training set is empty");
    std::mt19937_64 rng(cfg.seed);
    std::vector<ParamRef> params;
    net.params(params);
    auto velocity = zero_velocity(params);
    std::vector<double> losses;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_images) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_images);
            net.zero_grad();
            double loss = 0.0;
            for (std::size_t o = start; o < end; ++o) {
                loss += normal_loss_and_grad(net, data[order[o]], true);
            }
            const double count = static_cast<double>(end - start);
            loss /= count;
            check_finite(loss, losses.size());
            losses.push_back(loss);
            sgd_step(params, velocity, cfg.lr, cfg.momentum, 1.0 / count);
        }
        if (on_epoch) {
            on_epoch(epoch);
        }
    }
    return losses;
}

namespace {

Probe probe_normals(const NormalRegressor& net, const TrainSample& s)
{
    NormalRegressor::Cache cache;
    const Tensor y = net.forward(make_input(s.image, s.labels), &cache);
    KinkHash hash;
    for (const auto& pre : cache.pre) {
        hash.add(pre.data.data(), pre.data.size());
    }
    double loss = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < y.h; ++v) {
        for (int u = 0; u < y.w; ++u) {
            if (s.labels.at(u, v) <= 0.5f) {
                continue;
            }
            for (int c = 0; c < 6; ++c) {
                const Image& gt = c < 3 ? s.front_normals : s.back_normals;
                const double r = y.at(c, v, u) - gt.at(u, v, c % 3);
                hash.add(r < 0.0);
                loss += std::abs(r);
                ++n;
            }
        }
    }
    return {n ? loss / static_cast<double>(n) : 0.0, hash.h};
}

} // namespace

double grad_check(NormalRegressor& net, const TrainSample& s, double eps, double floor)
{
    net.zero_grad();
    normal_loss_and_grad(net, s, true);
    const std::uint64_t base = probe_normals(net, s).kinks;
    std::vector<ParamRef> params;
    net.params(params);
    double worst = 0.0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.size; ++i) {
            const double n = central_difference(p.value[i], eps, base, [&] { return probe_normals(net, s); });
            worst = std::max(worst, relative_error(p.grad[i], n, floor));
        }
    }
    return worst;
}

std::vector<double> overfit_batch(ImplicitModel& model, const TrainBatch& batch, int steps, double lr,
                                  double momentum)
{
    auto params = model.params();
    auto velocity = zero_velocity(params);
    std::vector<double> losses;
    losses.reserve(steps);
    for (int s = 0; s < steps; ++s) {
        model.zero_grad();
        const double loss = loss_and_grad(model, batch, true);
        check_finite(loss, losses.size());
        losses.push_back(loss);
        // linear decay to zero so the L1 steps stop oscillating around the fit
        const double step_lr = lr * (1.0 - static_cast<double>(s) / steps);
        sgd_step(params, velocity, step_lr, momentum, 1.0);
    }
    return losses;
}

namespace {

nlohmann::json param_table(const std::vector<ParamRef>& params)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : params) {
        arr.push_back({{"name", p.name}, {"size", p.size}});
    }
    return arr;
}

void write_payload(const std::filesystem::path& path, nlohmann::json header, const std::vector<ParamRef>& params)
{
    std::vector<float> payload;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p.size; ++i) {
            payload.push_back(static_cast<float>(p.value[i]));
        }
    }
    header["params"] = param_table(params);
    header["dtype"] = "float32";
    header["payload"] = path.filename().string() + ".raw";
    io::write_json(path, header);
    io::write_bytes(path.string() + ".raw", payload.data(), payload.size() * sizeof(float));
}

void read_payload(const std::filesystem::path& path, const nlohmann::json& header, std::vector<ParamRef>& params)
{
    const auto& table = header.at("params");
    require(table.size() == params.size(), ErrorCode::Io, "checkpoint parameter table does not match the network");
    std::size_t total = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(table[i].at("name").get<std::string>() == params[i].name &&
                    table[i].at("size").get<std::size_t>() == params[i].size,
                ErrorCode::Io, "checkpoint parameter " + params[i].name + " does not match");
        total += params[i].size;
    }
    const auto bytes = io::read_bytes(path.parent_path() / header.at("payload").get<std::string>());
    require(bytes.size() == total * sizeof(float), ErrorCode::Io, "checkpoint payload has the wrong size");
    std::size_t off = 0;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.size; ++i, ++off) {
            float f;
            std::memcpy(&f, bytes.data() + off * sizeof(float), sizeof(float));
            p.value[i] = f;
        }
    }
}

} // namespace

void write_checkpoint(const std::filesystem::path& path, ImplicitModel& model)
{
    nlohmann::json h{{"network", "implicit"},
                     {"extractor", to_string(model.extractor.kind())},
                     {"head_sizes", model.head.sizes()},
                     {"output_scale", model.output_scale}};
    write_payload(path, h, model.params());
}

ImplicitModel read_implicit_checkpoint(const std::filesystem::path& path)
{
    const auto h = io::read_json(path);
    require(h.value("network", "") == "implicit", ErrorCode::Io, "not an implicit-network checkpoint: " + path.string());
    ImplicitModel m;
    m.extractor = FeatureExtractor(extractor_kind_from_string(h.at("extractor").get<std::string>()));
    m.head = ImplicitHead(h.at("head_sizes").get<std::vector<int>>());
    m.output_scale = h.at("output_scale").get<double>();
    auto params = m.params();
    read_payload(path, h, params);
    return m;
}

void write_checkpoint(const std::filesystem::path& path, NormalRegressor& net)
{
    std::vector<ParamRef> params;
    net.params(params);
    write_payload(path, {{"network", "normal_regressor"}}, params);
}

NormalRegressor read_normal_checkpoint(const std::filesystem::path& path)
{
    const auto h = io::read_json(path);
    require(h.value("network", "") == "normal_regressor", ErrorCode::Io,
            "not a normal-regressor checkpoint: " + path.string());
    NormalRegressor net;
    std::vector<ParamRef> params;
    net.params(params);
    read_payload(path, h, params);
    return net;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses)
{
    std::string text = "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        text += std::to_string(i);
        text += ',';
        const auto res = std::to_chars(buf, buf + sizeof(buf), losses[i]);
        text.append(buf, res.ptr);
        text += '\n';
    }
    io::write_bytes(path, text.data(), text.size());
}

} // namespace hsdf::neural
