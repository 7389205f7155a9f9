#include "command.hpp"

#include "hsdf/composite/poisson.hpp"
#include "hsdf/composite/pseudo_pair.hpp"
#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"
#include "hsdf/morphable/fit.hpp"
#include "hsdf/raster/rasterizer.hpp"
#include "hsdf/synth/dataset.hpp"

#include <iostream>
#include <random>

namespace hsdf::cli {

namespace {

std::string path_arg(const json& cfg, const std::string& key) { return cfg.at(key).get<std::string>(); }

/// camera.json files hold {"perspective": ..., "crop": ...}; a bare camera
/// object is accepted too.
PerspectiveCamera read_view_camera(const fs::path& path)
{
    const json j = io::read_json(path);
    const Camera cam = io::camera_from_json(j.contains("perspective") ? j.at("perspective") : j);
    require(std::holds_alternative<PerspectiveCamera>(cam), ErrorCode::InvalidArgument,
            path.string() + " does not hold a perspective camera");
    return std::get<PerspectiveCamera>(cam);
}

std::optional<CropAlignedCamera> read_crop_camera(const fs::path& path)
{
    const json j = io::read_json(path);
    if (j.contains("crop")) {
        return std::get<CropAlignedCamera>(io::camera_from_json(j.at("crop")));
    }
    const Camera cam = io::camera_from_json(j);
    if (std::holds_alternative<CropAlignedCamera>(cam)) {
        return std::get<CropAlignedCamera>(cam);
    }
    return std::nullopt;
}

void write_render(const fs::path& dir, const raster::RenderBundle& r, const raster::NormalMaps& n)
{
    io::write_png(dir / "image.png", r.rgb);
    io::write_png(dir / "mask.png", r.labels, true);
    io::write_pfm(dir / "depth.pfm", r.depth);
    io::write_pfm(dir / "front_normal.pfm", n.front);
    io::write_pfm(dir / "back_normal.pfm", n.back);
}

int synth_shape(const json& cfg)
{
    const fs::path out = path_arg(cfg, "out");
    synth::ShapeOptions opts;
    opts.min_bumps = cfg.at("min_bumps");
    opts.max_bumps = cfg.at("max_bumps");
    const synth::AnalyticShape shape = synth::make_shape(cfg.at("seed").get<std::uint64_t>(), opts);
    synth::Tessellation t{cfg.at("rings"), cfg.at("segments")};
    fs::create_directories(out);
    io::write_json(out / "shape.json", shape.to_json());
    io::write_obj(out / "mesh.obj", synth::tessellate(shape, t));
    const int g = cfg.at("grid");
    if (g > 0) {
        const Vec3 half = Vec3::Constant(0.5 * cfg.at("box_mm").get<double>());
        synth::AnalyticShape s = shape;
        const ScalarField3 sdf = synth::sample_sdf(s, RigidPose{}, ScalarField3({g, g, g}, Box3{-half, half}));
        io::write_sdf(out / "shape.sdf", sdf, io::SdfPrecision::Float64);
    }
    write_run_record(out, "synth-shape", cfg);
    std::cout << "shape hash " << synth::shape_hash(shape) << "\n";
    return 0;
}

synth::DatasetConfig dataset_config(const json& cfg)
{
    synth::DatasetConfig c;
    c.seed = cfg.at("seed");
    c.n_train = cfg.at("n_train");
    const int n = cfg.at("n");
    const int n_test = cfg.at("n_test");
    if (n >= 0) {
        c.n_test = std::max(0, n_test);
        c.n_train = n - c.n_test;
        if (c.n_train < 0) {
            throw UsageError("n_test exceeds n");
        }
    } else if (n_test >= 0) {
        c.n_test = n_test;
    }
    c.image_size = cfg.at("image_size");
    c.grid = cfg.at("grid");
    c.box_mm = cfg.at("box_mm");
    c.camera_distance_mm = cfg.at("camera_distance_mm");
    c.bucket_weights = cfg.at("bucket_weights").get<std::array<double, 4>>();
    c.tessellation = {cfg.at("rings"), cfg.at("segments")};
    return c;
}

int synth_dataset(const json& cfg)
{
    const synth::DatasetConfig c = dataset_config(cfg);
    c.validate();
    const fs::path out = path_arg(cfg, "out");
    synth::build_dataset(out, c);
    const int k_id = cfg.at("model_k_id");
    if (k_id > 0) {
        const auto model = synth::make_synthetic_3dmm(cfg.at("model_shapes"), k_id, c.seed + 1, 4, c.tessellation);
        morphable::write_model(out / "model.json", model);
    }
    write_run_record(out, "synth-dataset", cfg);
    std::cout << "wrote " << c.total() << " samples (" << c.n_train << " train, " << c.n_test << " test) to "
              << out.string() << "\n";
    return 0;
}

int render(const json& cfg)
{
    const fs::path out = path_arg(cfg, "out");
    const TriangleMesh mesh = io::read_mesh(path_arg(cfg, "mesh"));
    const PerspectiveCamera cam = read_view_camera(path_arg(cfg, "camera"));
    std::optional<Image> texture;
    if (!path_arg(cfg, "texture").empty()) {
        texture = io::read_png(path_arg(cfg, "texture"));
    }
    fs::create_directories(out);
    write_render(out, raster::rasterize(mesh, cam, texture), raster::render_normal_maps(mesh, cam));
    write_run_record(out, "render", cfg);
    return 0;
}

morphable::FitParams initial_params(const morphable::MorphableModel& model, const fs::path& camera_path,
                                    const json& cfg)
{
    morphable::FitParams init = morphable::neutral_params(model, read_view_camera(camera_path));
    if (const auto crop = read_crop_camera(camera_path)) {
        init.pose.translation = crop->box.center();
    } else {
        init.pose.translation = Vec3(0, 0, cfg.at("init_distance").get<double>());
    }
    return init;
}

int fit(const json& cfg)
{
    const fs::path out = path_arg(cfg, "out");
    const auto model = morphable::read_model(path_arg(cfg, "model"));
    const auto observed = morphable::landmarks_from_json(io::read_json(path_arg(cfg, "landmarks")));
    morphable::FitParams init = initial_params(model, path_arg(cfg, "camera"), cfg);
    if (!path_arg(cfg, "init").empty()) {
        init = morphable::params_from_json(io::read_json(path_arg(cfg, "init")));
    }
    morphable::FitOptions opts;
    opts.lambda_id = cfg.at("lambda_id");
    opts.lambda_exp = cfg.at("lambda_exp");
    opts.max_iters = cfg.at("max_iters");
    const auto r = morphable::fit_landmarks(model, observed, init, opts);
    fs::create_directories(out);
    json j = morphable::params_to_json(r.params);
    j["rms_px"] = r.rms_px;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    io::write_json(out / "params.json", j);
    io::write_obj(out / "mesh.obj", morphable::posed_shape(model, r.params));
    write_run_record(out, "fit", cfg);
    std::cout << "rms " << r.rms_px << " px after " << r.iterations << " iterations"
              << (r.converged ? "" : " (not converged)") << "\n";
    return 0;
}

int blend(const json& cfg)
{
    const fs::path out = path_arg(cfg, "out");
    const Image source = io::read_png(path_arg(cfg, "source"));
    const Image target = io::read_png(path_arg(cfg, "target"));
    const Image mask = io::read_png(path_arg(cfg, "mask"));
    composite::SolveStats stats;
    const Image blended = composite::poisson_blend(source, target, slice_channels(mask, 0, 1), {}, &stats);
    fs::create_directories(out);
    io::write_png(out / "blended.png", blended);
    io::write_json(out / "blend.json", {{"max_residual", stats.max_residual}, {"iterations", stats.iterations}});
    write_run_record(out, "blend", cfg);
    return 0;
}

// The "in-the-wild" stand-in: a dataset render over a seeded noise background.
Image wild_image(const Image& rgb, const Image& labels, double amplitude, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image out = rgb;
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            const double base = u(rng);
            for (int c = 0; c < 3; ++c) {
                const double v = 0.5 + amplitude * (base - 0.5) + 0.25 * amplitude * (u(rng) - 0.5);
                if (labels.at(x, y) <= 0.5f) {
                    out.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
    }
    return out;
}

int make_pairs(const json& cfg)
{
    const fs::path data = path_arg(cfg, "dataset");
    const fs::path out = path_arg(cfg, "out");
    const fs::path model_path = path_arg(cfg, "model").empty() ? data / "model.json" : fs::path(path_arg(cfg, "model"));
    const auto model = morphable::read_model(model_path);
    const std::uint64_t seed = cfg.at("seed");
    const int grid = cfg.at("grid");
    const std::string split = cfg.at("split");
    composite::PairOptions popts;
    popts.contour_spacing_px = cfg.at("contour_spacing");
    popts.min_intersection_fraction = cfg.at("min_intersection");

    json entries = json::array();
    json rejected = json::array();
    int index = 0;
    for (const auto& e : synth::read_manifest(data)) {
        if (!split.empty() && e.split != split) {
            continue;
        }
        const fs::path sdir = data / "pairs" / e.id;
        const Image rgb = io::read_png(sdir / "image.png");
        const Image labels = io::read_png(sdir / "mask.png", true);
        const Image wild = wild_image(rgb, labels, cfg.at("noise"), seed * 7919 + static_cast<std::uint64_t>(index++));

        auto observed = morphable::landmarks_from_json(io::read_json(sdir / "landmarks.json"));
        const double lm_noise = cfg.at("landmark_noise");
        if (lm_noise > 0.0) {
            std::mt19937_64 rng(seed + 104729 * static_cast<std::uint64_t>(index));
            std::normal_distribution<double> g(0.0, lm_noise);
            for (auto& p : observed) {
                p += Vec2(g(rng), g(rng));
            }
        }
        const auto init = initial_params(model, sdir / "camera.json", cfg);
        const auto fitted = morphable::fit_landmarks(model, observed, init);
        const TriangleMesh mesh = morphable::posed_shape(model, fitted.params);
        composite::RenderedFace face{raster::rasterize(mesh, init.camera), mesh, init.camera};
        const auto pair = composite::make_pseudo_pair(wild, labels, face, popts);
        if (!pair.accepted) {
            rejected.push_back({{"id", e.id}, {"reason", composite::to_string(pair.reason)}});
            continue;
        }
        const fs::path pdir = out / "pairs" / e.id;
        fs::create_directories(pdir);
        io::write_png(pdir / "image.png", pair.blended);
        io::write_png(pdir / "mask.png", face.bundle.labels, true);
        io::write_pfm(pdir / "depth.pfm", face.bundle.depth);
        const auto normals = raster::render_normal_maps(mesh, init.camera);
        io::write_pfm(pdir / "front_normal.pfm", normals.front);
        io::write_pfm(pdir / "back_normal.pfm", normals.back);
        io::write_obj(pdir / "mesh.obj", pair.gt_mesh);
        const auto crop = read_crop_camera(sdir / "camera.json");
        json cam = {{"perspective", io::to_json(Camera{pair.camera})}};
        if (crop) {
            cam["crop"] = io::to_json(Camera{*crop});
            io::write_sdf(pdir / "gt.sdf", synth::mesh_sdf(pair.gt_mesh, ScalarField3({grid, grid, grid}, crop->box)),
                          io::SdfPrecision::Float64);
        }
        io::write_json(pdir / "camera.json", cam);
        json params = morphable::params_to_json(fitted.params);
        params["fit_rms_px"] = fitted.rms_px;
        params["source"] = e.id;
        io::write_json(pdir / "params.json", params);
        entries.push_back({{"id", e.id}, {"split", e.split}, {"pose_deg", e.pose_deg}});
    }
    fs::create_directories(out);
    io::write_json(out / "manifest.json", {{"samples", entries}, {"rejected", rejected}});
    write_run_record(out, "make-pairs", cfg);
    std::cout << entries.size() << " pairs written, " << rejected.size() << " rejected\n";
    return 0;
}

} // namespace

std::vector<Command> data_commands()
{
    return {
        {"synth-shape",
         "write one seeded analytic shape (parameters, mesh, exact SDF grid)",
         {out_param("output directory"),
          seed_param(),
          {"grid", 64, "SDF grid resolution, 0 to skip"},
          {"box_mm", 240.0, "side of the SDF box centred on the shape (mm)"},
          {"min_bumps", 3, "fewest bumps"},
          {"max_bumps", 10, "most bumps"},
          {"rings", 40, "tessellation latitude rings"},
          {"segments", 80, "tessellation longitude segments"}},
         synth_shape},
        {"synth-dataset",
         "render a synthetic dataset with exact ground truth",
         {out_param("output directory"),
          seed_param(),
          {"n", -1, "total sample count, replacing n_train"},
          {"n_train", 200, "training samples"},
          {"n_test", -1, "held-out samples (-1: 40, or none when n is set)"},
          {"image_size", 128, "render size (px)"},
          {"grid", 128, "SDF grid resolution"},
          {"box_mm", 240.0, "crop box side (mm)"},
          {"camera_distance_mm", 50000.0, "camera to object distance (mm)"},
          {"bucket_weights", {0.25, 0.38, 0.25, 0.12}, "pose bucket weights, 0-5/5-30/30-60/60-90 degrees"},
          {"rings", 40, "tessellation latitude rings"},
          {"segments", 80, "tessellation longitude segments"},
          {"model_shapes", 50, "shapes behind the synthetic morphable model"},
          {"model_k_id", 10, "identity components of the model, 0 to skip it"}},
         synth_dataset},
        {"render",
         "rasterize a mesh: rgb, labels, depth, front/back normal maps",
         {out_param("output directory"),
          {"mesh", "", "mesh file (.obj or .ply)", true},
          {"camera", "", "camera.json", true},
          {"texture", "", "optional texture png"}},
         render},
        {"fit",
         "fit the morphable model to 2D landmarks",
         {out_param("output directory"),
          {"model", "", "morphable model (.json)", true},
          {"landmarks", "", "landmarks.json", true},
          {"camera", "", "camera.json (focal length is kept fixed)", true},
          {"init", "", "optional initial params.json"},
          {"init_distance", 50000.0, "initial depth when the camera file has no crop box (mm)"},
          {"lambda_id", 1e-3, "identity prior weight"},
          {"lambda_exp", 1e-3, "expression prior weight"},
          {"max_iters", 100, "iteration limit"}},
         fit},
        {"blend",
         "Poisson-blend a source image into a target inside a mask",
         {out_param("output directory"),
          {"source", "", "source png", true},
          {"target", "", "target png", true},
          {"mask", "", "mask png (white = blend)", true}},
         blend},
        {"make-pairs",
         "build pseudo image/mesh pairs: fit, render, warp, inpaint, blend",
         {out_param("output directory"),
          seed_param(),
          {"dataset", "", "dataset directory standing in for wild images", true},
          {"model", "", "morphable model (default <dataset>/model.json)"},
          {"split", "", "only use this split (empty = all)"},
          {"grid", 64, "resolution of the per-pair SDF grid"},
          {"noise", 0.6, "amplitude of the synthetic background"},
          {"landmark_noise", 0.0, "Gaussian landmark noise (px)"},
          {"init_distance", 50000.0, "initial depth when a camera has no crop box (mm)"},
          {"contour_spacing", 16, "control point spacing along the contours (px)"},
          {"min_intersection", 0.01, "smallest accepted face intersection (fraction of the image)"}},
         make_pairs},
    };
}

} // namespace hsdf::cli
