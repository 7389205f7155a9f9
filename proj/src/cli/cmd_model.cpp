#include "command.hpp"

#include "hsdf/bench/metrics.hpp"
#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"
#include "hsdf/reconstruct/reconstruct.hpp"
#include "hsdf/synth/dataset.hpp"

#include <fstream>
#include <iostream>
#include <random>

namespace hsdf::cli {

namespace {

std::string str(const json& cfg, const std::string& key) { return cfg.at(key).get<std::string>(); }

reconstruct::Levels parse_levels(const json& cfg)
{
    try {
        return reconstruct::levels_from_string(str(cfg, "levels"));
    } catch (const Error&) {
        throw UsageError("--levels must be one of base, base+fine, base+fine+norm");
    }
}

neural::TrainConfig train_config(const json& cfg)
{
    neural::TrainConfig c;
    c.epochs = cfg.at("epochs");
    c.batch_images = cfg.at("batch_images");
    c.points_per_image = cfg.at("points_per_image");
    c.pool_per_image = cfg.at("pool_per_image");
    c.lr = cfg.at("lr");
    c.momentum = cfg.at("momentum");
    c.clamp_voxels = cfg.at("clamp_voxels");
    c.sigma_voxels = cfg.at("sigma_voxels");
    c.mean_kernel = cfg.at("mean_kernel");
    c.seed = cfg.at("seed");
    return c;
}

std::vector<synth::ManifestEntry> select(const fs::path& data, const std::string& split)
{
    std::vector<synth::ManifestEntry> out;
    for (auto& e : synth::read_manifest(data)) {
        if (split.empty() || e.split == split) {
            out.push_back(std::move(e));
        }
    }
    return out;
}

int train(const json& cfg)
{
    const fs::path data = str(cfg, "data");
    const fs::path out = str(cfg, "out");
    const auto levels = parse_levels(cfg);
    const auto entries = select(data, str(cfg, "split"));
    require(!entries.empty(), ErrorCode::InvalidArgument, "no samples in the selected split");
    std::vector<neural::TrainSample> samples;
    for (const auto& e : entries) {
        samples.push_back(synth::load_training_sample(data / "pairs" / e.id));
    }
    neural::TrainConfig tc = train_config(cfg);
    const std::uint64_t seed = cfg.at("seed");
    fs::create_directories(out);
    write_run_record(out, "train", cfg);

    auto log_epoch = [](const char* level, int epochs) {
        return [level, epochs](int e) { std::cout << level << " epoch " << e + 1 << "/" << epochs << std::endl; };
    };
    auto implicit_level = [&](const char* name, neural::ExtractorKind kind, neural::TargetKind target,
                              std::uint64_t model_seed, double lr) {
        auto model = neural::ImplicitModel::make(kind, model_seed);
        neural::TrainConfig c = tc;
        c.lr = lr;
        const fs::path ckpt = out / (std::string(name) + ".ckpt");
        auto log = log_epoch(name, c.epochs);
        const auto losses = neural::train_implicit(model, samples, target, c, [&](int e) {
            neural::write_checkpoint(ckpt, model);
            log(e);
        });
        neural::write_checkpoint(ckpt, model);
        neural::write_loss_csv(out / (std::string(name) + "_loss.csv"), losses);
    };

    implicit_level("base", neural::extractor_kind_from_string(str(cfg, "base_extractor")), neural::TargetKind::Base,
                   seed * 3 + 1, tc.lr);
    if (levels != reconstruct::Levels::Base) {
        implicit_level("fine", neural::extractor_kind_from_string(str(cfg, "fine_extractor")),
                       neural::TargetKind::Fine, seed * 3 + 2, cfg.at("fine_lr").get<double>() > 0 ? cfg.at("fine_lr").get<double>() : tc.lr);
    }
    if (levels == reconstruct::Levels::BaseFineNorm && !cfg.at("use_gt_normals").get<bool>()) {
        neural::NormalRegressor net;
        std::mt19937_64 rng(seed * 3 + 3);
        net.init(rng);
        neural::TrainConfig c = tc;
        const int ne = cfg.at("normal_epochs");
        c.epochs = ne >= 0 ? ne : tc.epochs;
        const double nlr = cfg.at("normal_lr");
        c.lr = nlr > 0 ? nlr : tc.lr;
        const fs::path ckpt = out / "normal.ckpt";
        auto log = log_epoch("normal", c.epochs);
        const auto losses = neural::train_normals(net, samples, c, [&](int e) {
            neural::write_checkpoint(ckpt, net);
            log(e);
        });
        neural::write_checkpoint(ckpt, net);
        neural::write_loss_csv(out / "normal_loss.csv", losses);
    }
    return 0;
}

double check_model(neural::ImplicitModel& m, int size, int points, std::uint64_t seed, double eps, double floor)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    neural::TrainBatch b;
    b.image = Image(size, size, 3);
    b.labels = Image(size, size, 1);
    for (auto& v : b.image.data) {
        v = static_cast<float>(u(rng));
    }
    for (auto& v : b.labels.data) {
        v = static_cast<float>(std::floor(u(rng) * 4));
    }
    b.camera = CropAlignedCamera{Box3{Vec3(-1, -1, -1), Vec3(1, 1, 1)}, size, size};
    for (int i = 0; i < points; ++i) {
        b.points.emplace_back(2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1);
        b.targets.push_back(4 * u(rng) - 2);
    }
    return neural::grad_check(m, b, eps, floor);
}

int gradcheck(const json& cfg)
{
    const fs::path out = str(cfg, "out");
    const std::string which = str(cfg, "network");
    if (which != "all" && which != "base" && which != "fine" && which != "normal") {
        throw UsageError("--network must be all, base, fine or normal");
    }
    const std::uint64_t seed = cfg.at("seed");
    const int size = cfg.at("size");
    const int points = cfg.at("points");
    const double eps = cfg.at("eps");
    const double floor = cfg.at("floor");
    const double tol = cfg.at("tolerance");
    json results = json::object();
    bool ok = true;
    auto record = [&](const std::string& name, std::size_t params, double err) {
        results[name] = {{"params", params}, {"max_rel_error", err}, {"pass", err < tol}};
        ok = ok && err < tol;
        std::cout << name << ": " << params << " params, max relative error " << err << (err < tol ? "" : " FAIL")
                  << "\n";
    };
    if (which == "all" || which == "base") {
        auto m = neural::ImplicitModel::make(neural::ExtractorKind::HourglassLite, seed + 1);
        record("base", m.param_count(), check_model(m, size, points, seed + 11, eps, floor));
    }
    if (which == "all" || which == "fine") {
        auto m = neural::ImplicitModel::make(neural::ExtractorKind::ShallowConv, seed + 2);
        record("fine", m.param_count(), check_model(m, size, points, seed + 12, eps, floor));
    }
    if (which == "all" || which == "normal") {
        neural::NormalRegressor net;
        std::mt19937_64 rng(seed + 3);
        net.init(rng);
        std::vector<neural::ParamRef> refs;
        net.params(refs);
        std::size_t count = 0;
        for (const auto& r : refs) {
            count += r.size;
        }
        synth::DatasetConfig dc;
        dc.image_size = size;
        dc.grid = 16;
        dc.seed = seed;
        const auto s = synth::make_sample(dc, 0);
        neural::TrainSample ts{s.render.rgb, s.render.labels, s.crop, s.sdf, s.normals.front, s.normals.back};
        record("normal", count, neural::grad_check(net, ts, eps, floor));
    }
    fs::create_directories(out);
    io::write_json(out / "gradcheck.json", {{"tolerance", tol}, {"eps", eps}, {"results", results}});
    write_run_record(out, "gradcheck", cfg);
    return ok ? 0 : 2;
}

int reconstruct_cmd(const json& cfg)
{
    const fs::path data = str(cfg, "data");
    const fs::path out = str(cfg, "out");
    const auto levels = parse_levels(cfg);
    auto weights = reconstruct::load_weights(str(cfg, "weights"));
    const bool gt_normals = cfg.at("use_gt_normals");
    const int grid = cfg.at("grid");
    reconstruct::ReconstructConfig rc;
    rc.grid.levels = levels;
    rc.grid.gain.lambda = cfg.at("gain");
    rc.iso = cfg.at("iso");
    rc.min_coverage = cfg.at("min_coverage");
    rc.keep_field = cfg.at("keep_field");

    const auto entries = select(data, str(cfg, "split"));
    json manifest = json::array();
    int successes = 0;
    for (const auto& e : entries) {
        const fs::path sdir = data / "pairs" / e.id;
        const auto sample = synth::load_training_sample(sdir);
        const int g = grid > 0 ? grid : sample.sdf.dims[0];
        rc.grid.dims = {g, g, g};
        if (gt_normals) {
            rc.grid.gt_front_normals = sample.front_normals;
            rc.grid.gt_back_normals = sample.back_normals;
        }
        const auto r = reconstruct::reconstruct(sample.image, sample.labels, weights, sample.camera, rc);
        const fs::path pdir = out / e.id;
        fs::create_directories(pdir);
        io::write_mesh(pdir / ("mesh." + str(cfg, "format")), r.mesh);
        if (r.field) {
            io::write_sdf(pdir / "field.sdf", *r.field);
        }
        io::write_json(pdir / "result.json", {{"success", r.success},
                                              {"coverage", r.coverage},
                                              {"vertices", r.mesh.vertices.size()},
                                              {"faces", r.mesh.faces.size()}});
        manifest.push_back({{"id", e.id}, {"split", e.split}, {"pose_deg", e.pose_deg}, {"success", r.success}});
        successes += r.success ? 1 : 0;
        std::cout << e.id << (r.success ? " ok" : " failed") << " coverage " << r.coverage << "\n";
    }
    io::write_json(out / "manifest.json", {{"levels", reconstruct::to_string(levels)}, {"samples", manifest}});
    write_run_record(out, "reconstruct", cfg);
    std::cout << successes << "/" << entries.size() << " reconstructions succeeded\n";
    return 0;
}

std::optional<fs::path> find_mesh(const fs::path& dir, const std::string& id)
{
    for (const fs::path& base : {dir / "pairs" / id, dir / id}) {
        for (const char* name : {"mesh.obj", "mesh.ply"}) {
            if (fs::exists(base / name)) {
                return base / name;
            }
        }
    }
    return std::nullopt;
}

bool marked_failed(const fs::path& dir, const std::string& id)
{
    for (const fs::path& base : {dir / "pairs" / id, dir / id}) {
        if (fs::exists(base / "result.json")) {
            return !io::read_json(base / "result.json").value("success", true);
        }
    }
    return false;
}

bench::MetricConfig metric_config(const json& cfg)
{
    bench::MetricConfig m;
    m.cd_samples = cfg.at("cd_samples");
    const double thr = cfg.at("cr_threshold");
    if (thr > 0) {
        m.cr_threshold = thr;
    }
    const std::string f = str(cfg, "mne_formula");
    if (f == "norm-diff") {
        m.mne_formula = bench::MneFormula::NormDiff;
    } else if (f == "one-minus-cos") {
        m.mne_formula = bench::MneFormula::OneMinusCos;
    } else {
        throw UsageError("--mne-formula must be norm-diff or one-minus-cos");
    }
    const std::string a = str(cfg, "alignment");
    if (a == "none") {
        m.alignment = bench::Alignment::None;
    } else if (a == "rigid-icp") {
        m.alignment = bench::Alignment::RigidIcp;
    } else {
        throw UsageError("--alignment must be none or rigid-icp");
    }
    m.seed = cfg.at("seed");
    return m;
}

int eval(const json& cfg)
{
    const fs::path pred = str(cfg, "pred");
    const fs::path gt = str(cfg, "gt");
    const fs::path out = str(cfg, "out");
    const auto mcfg = metric_config(cfg);
    fs::path manifest = str(cfg, "manifest");
    if (manifest.empty()) {
        manifest = fs::exists(gt / "manifest.json") ? gt : pred;
    } else {
        manifest = manifest.parent_path();
    }
    const auto entries = select(manifest, str(cfg, "split"));
    require(!entries.empty(), ErrorCode::InvalidArgument, "manifest lists no samples");
    std::vector<bench::BenchPair> pairs;
    for (const auto& e : entries) {
        const auto gt_path = find_mesh(gt, e.id);
        require(gt_path.has_value(), ErrorCode::Io, "no ground-truth mesh for " + e.id);
        bench::BenchPair p{e.id, std::nullopt, io::read_mesh(*gt_path), e.pose_deg};
        const auto pred_path = find_mesh(pred, e.id);
        if (pred_path && !marked_failed(pred, e.id)) {
            p.pred = io::read_mesh(*pred_path);
        }
        pairs.push_back(std::move(p));
    }
    auto report = bench::evaluate_benchmark(pairs, mcfg);
    report.method = str(cfg, "method");
    fs::create_directories(out);
    io::write_json(out / "report.json", bench::to_json(report));
    const std::string table = bench::report_table({report});
    std::ofstream(out / "report.txt") << table;
    write_run_record(out, "eval", cfg);
    std::cout << table;
    return 0;
}

int report(const json& cfg)
{
    const fs::path out = str(cfg, "out");
    const auto paths = cfg.at("reports").get<std::vector<std::string>>();
    if (paths.empty()) {
        throw UsageError("--reports needs at least one report.json");
    }
    std::vector<bench::BenchmarkReport> reports;
    json all = json::array();
    for (const auto& p : paths) {
        const json j = io::read_json(p);
        reports.push_back(bench::report_from_json(j));
        all.push_back(j);
    }
    const std::string table = bench::report_table(reports);
    fs::create_directories(out);
    std::ofstream(out / "table.txt") << table;
    io::write_json(out / "report.json", all);
    write_run_record(out, "report", cfg);
    std::cout << table;
    return 0;
}

} // namespace

std::vector<Command> model_commands()
{
    const std::vector<Param> train_params = {
        {"epochs", 50, "training epochs"},
        {"batch_images", 4, "images per step"},
        {"points_per_image", 2048, "sample points per image and step"},
        {"pool_per_image", 16384, "precomputed sample pool per image"},
        {"lr", 1e-3, "learning rate"},
        {"fine_lr", 0.0, "learning rate of the fine level (0 = lr)"},
        {"normal_lr", 0.0, "learning rate of the normal regressor (0 = lr)"},
        {"normal_epochs", -1, "epochs of the normal regressor (-1 = epochs)"},
        {"momentum", 0.9, "SGD momentum"},
        {"clamp_voxels", 5.0, "SDF clamp (voxels)"},
        {"sigma_voxels", 1.5, "surface sample perturbation (voxels)"},
        {"mean_kernel", 5, "mean kernel size of the fine target"},
    };
    Command train_cmd{"train",
                      "train the hierarchy levels on a dataset",
                      {out_param("weights directory"),
                       seed_param(),
                       {"data", "", "dataset directory", true},
                       {"split", "train", "split to train on (empty = all)"},
                       {"levels", "base+fine+norm", "base, base+fine or base+fine+norm"},
                       {"use_gt_normals", false, "skip the normal regressor (reconstruct will use GT normals)"},
                       {"base_extractor", "hourglass_lite", "feature extractor of the base level"},
                       {"fine_extractor", "shallow_conv", "feature extractor of the fine level"}},
                      train};
    train_cmd.params.insert(train_cmd.params.end(), train_params.begin(), train_params.end());
    return {
        train_cmd,
        {"gradcheck",
         "finite-difference gradient check of every network",
         {out_param("output directory"),
          seed_param(),
          {"network", "all", "all, base, fine or normal"},
          {"size", 16, "image size"},
          {"points", 24, "sample points"},
          {"eps", 1e-4, "central difference step"},
          {"floor", 1e-6, "denominator floor of the relative error"},
          {"tolerance", 1e-4, "largest accepted relative error"}},
         gradcheck},
        {"reconstruct",
         "reconstruct meshes for the samples of a dataset",
         {out_param("output directory"),
          {"weights", "", "weights directory", true},
          {"data", "", "dataset directory", true},
          {"split", "test", "split to reconstruct (empty = all)"},
          {"levels", "base+fine+norm", "base, base+fine or base+fine+norm"},
          {"use_gt_normals", false, "carve with the ground-truth normal maps"},
          {"grid", 128, "grid resolution (0 = that of the stored SDF)"},
          {"iso", 0.0, "iso value"},
          {"gain", 1.0, "normal carving gain"},
          {"min_coverage", 0.5, "mask coverage needed for success"},
          {"keep_field", false, "also write the SDF grid"},
          {"format", "obj", "mesh format, obj or ply"}},
         reconstruct_cmd},
        {"eval",
         "benchmark predicted meshes against ground truth",
         {out_param("output directory"),
          seed_param(),
          {"pred", "", "predicted meshes", true},
          {"gt", "", "ground-truth meshes", true},
          {"manifest", "", "manifest.json with pose angles (default: in --gt, else --pred)"},
          {"split", "", "only pairs of this split (empty = all)"},
          {"method", "Ours", "row label"},
          {"cd_samples", 10000, "surface samples per mesh"},
          {"cr_threshold", 0.0, "completeness threshold in mm (0 = 2x median GT edge)"},
          {"mne_formula", "norm-diff", "norm-diff or one-minus-cos"},
          {"alignment", "none", "none or rigid-icp"}},
         eval},
        {"report",
         "combine benchmark reports into one table",
         {out_param("output directory"), {"reports", json::array(), "report.json files", true}},
         report},
    };
}

} // namespace hsdf::cli
