#include "hsdf/reconstruct/reconstruct.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"
#include "hsdf/neural/train.hpp"
#include "hsdf/raster/rasterizer.hpp"
#include "hsdf/reconstruct/marching_cubes.hpp"

#include <algorithm>

namespace hsdf::reconstruct {

std::string to_string(Levels l)
{
    switch (l) {
    case Levels::Base: return "base";
    case Levels::BaseFine: return "base+fine";
    case Levels::BaseFineNorm: return "base+fine+norm";
    }
    return "base";
}

Levels levels_from_string(const std::string& s)
{
    if (s == "base") {
        return Levels::Base;
    }
    if (s == "base+fine") {
        return Levels::BaseFine;
    }
    if (s == "base+fine+norm") {
        return Levels::BaseFineNorm;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown levels '" + s + "' (base, base+fine, base+fine+norm)");
}

Weights load_weights(const std::filesystem::path& dir)
{
    Weights w;
    if (std::filesystem::exists(dir / "base.ckpt")) {
        w.base = neural::read_implicit_checkpoint(dir / "base.ckpt");
    }
    if (std::filesystem::exists(dir / "fine.ckpt")) {
        w.fine = neural::read_implicit_checkpoint(dir / "fine.ckpt");
    }
    if (std::filesystem::exists(dir / "normal.ckpt")) {
        w.normals = neural::read_normal_checkpoint(dir / "normal.ckpt");
    }
    return w;
}

void save_weights(const std::filesystem::path& dir, Weights& w)
{
    std::filesystem::create_directories(dir);
    if (w.base) {
        neural::write_checkpoint(dir / "base.ckpt", *w.base);
    }
    if (w.fine) {
        neural::write_checkpoint(dir / "fine.ckpt", *w.fine);
    }
    if (w.normals) {
        neural::write_checkpoint(dir / "normal.ckpt", *w.normals);
    }
}

ScalarField3 camera_lattice(const CropAlignedCamera& camera, const std::array<int, 3>& dims)
{
    return ScalarField3(dims, camera.box, 0.0);
}

namespace {

ScalarField3 run_head(const neural::ImplicitModel& m, const Image& rgb, const Image& labels,
                      const CropAlignedCamera& camera, const std::array<int, 3>& dims)
{
    ScalarField3 f = camera_lattice(camera, dims);
    const neural::Tensor feats = neural::extract_features(m.extractor, rgb, labels);
    std::vector<Vec3> points(f.size());
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                points[f.index(i, j, k)] = f.node_position(i, j, k);
            }
        }
    }
    const auto out = neural::eval_implicit(m.head, feats, camera, points);
    for (std::size_t n = 0; n < out.size(); ++n) {
        f.values[n] = out[n] * m.output_scale;
    }
    return f;
}

} // namespace

LevelFields evaluate_levels(const Weights& w, const Image& rgb, const Image& labels,
                            const CropAlignedCamera& camera, const GridConfig& cfg)
{
    require(cfg.dims[0] >= 16 && cfg.dims[1] >= 16 && cfg.dims[2] >= 16, ErrorCode::InvalidArgument,
            "grid needs at least 16 nodes per axis");
    require(rgb.width == camera.width && rgb.height == camera.height, ErrorCode::SizeMismatch,
            "image size must match the camera");
    require(w.base.has_value(), ErrorCode::InvalidArgument, "base level has no weights");
    LevelFields out;
    out.base = run_head(*w.base, rgb, labels, camera, cfg.dims);
    if (cfg.levels != Levels::Base) {
        require(w.fine.has_value(), ErrorCode::InvalidArgument, "fine level enabled but no fine weights");
        out.fine = run_head(*w.fine, rgb, labels, camera, cfg.dims);
    }
    if (cfg.levels == Levels::BaseFineNorm) {
        if (cfg.gt_front_normals && cfg.gt_back_normals) {
            out.front_normals = *cfg.gt_front_normals;
            out.back_normals = *cfg.gt_back_normals;
        } else {
            require(w.normals.has_value(), ErrorCode::InvalidArgument,
                    "normal level enabled but no regressor weights and no ground-truth normals");
            auto n = neural::regress_normals(*w.normals, rgb, labels);
            out.front_normals = std::move(n.front);
            out.back_normals = std::move(n.back);
        }
    }
    return out;
}

ScalarField3 compose_levels(const LevelFields& f, const CropAlignedCamera& camera, Levels levels,
                            const field::CarveGain& gain)
{
    if (levels == Levels::Base) {
        return f.base;
    }
    require(f.fine.has_value(), ErrorCode::InvalidArgument, "fine field missing");
    if (levels == Levels::BaseFine) {
        ScalarField3 sum = f.base;
        for (std::size_t n = 0; n < sum.size(); ++n) {
            sum.values[n] += f.fine->values[n];
        }
        return sum;
    }
    return field::compose_field(f.base, *f.fine, f.front_normals, f.back_normals, camera, {}, gain);
}

ScalarField3 evaluate_grid(const Weights& w, const Image& rgb, const Image& labels, const CropAlignedCamera& camera,
                           const GridConfig& cfg)
{
    return compose_levels(evaluate_levels(w, rgb, labels, camera, cfg), camera, cfg.levels, cfg.gain);
}

double mask_coverage(const TriangleMesh& mesh, const Image& labels, const CropAlignedCamera& camera)
{
    std::size_t mask_px = 0;
    for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
        mask_px += labels.data[p * labels.channels] > 0.5f ? 1 : 0;
    }
    if (mask_px == 0 || mesh.faces.empty()) {
        return 0.0;
    }
    int count = 0;
    const auto comp = face_components(mesh, &count);
    std::vector<double> area(count, 0.0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        area[comp[f]] += face_cross(mesh, static_cast<int>(f)).norm();
    }
    const int best = static_cast<int>(std::max_element(area.begin(), area.end()) - area.begin());
    TriangleMesh part;
    part.vertices = mesh.vertices;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        if (comp[f] == best) {
            part.faces.push_back(mesh.faces[f]);
        }
    }
    const Image cov = raster::coverage_mask(part, camera);
    std::size_t hit = 0;
    for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
        if (labels.data[p * labels.channels] > 0.5f && cov.data[p] > 0.5f) {
            ++hit;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(mask_px);
}

ReconstructResult reconstruct_mesh(const ScalarField3& field, const Image& labels, const CropAlignedCamera& camera,
                                   const ReconstructConfig& cfg)
{
    ReconstructResult r;
    r.mesh = marching_cubes(field, cfg.iso);
    r.coverage = mask_coverage(r.mesh, labels, camera);
    r.success = !r.mesh.faces.empty() && r.coverage >= cfg.min_coverage;
    if (cfg.keep_field) {
        r.field = field;
    }
    return r;
}

ReconstructResult reconstruct(const Image& rgb, const Image& labels, const Weights& w,
                              const CropAlignedCamera& camera, const ReconstructConfig& cfg)
{
    return reconstruct_mesh(evaluate_grid(w, rgb, labels, camera, cfg.grid), labels, camera, cfg);
}

} // namespace hsdf::reconstruct
