#include "hsdf/synth/dataset.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"
#include "hsdf/geom/parallel.hpp"
#include "hsdf/bench/kdtree.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <random>

namespace hsdf::synth {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

Eigen::VectorXd stack(const std::vector<Vec3>& v)
{
    Eigen::VectorXd x(3 * static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        x.segment<3>(3 * static_cast<Eigen::Index>(i)) = v[i];
    }
    return x;
}

// Smooth local displacement fields in the parameter domain.
Eigen::MatrixXd expression_fields(const std::vector<Vec3>& dirs, int k_exp)
{
    struct Field {
        double theta, phi, width;
        Vec3 move;  // mm at the centre
        double mirror;  // also place at -phi with x mirrored
    };
    const Field base[] = {
        {2.05, 0.0, 0.35, Vec3(0, 6, 0), 0},      // jaw drop
        {1.85, 0.3, 0.18, Vec3(3, -2, 0), 1},     // mouth corners
        {1.05, 0.35, 0.2, Vec3(0, -3, 0), 1},     // brows
        {1.6, 0.55, 0.25, Vec3(0, 0, -3), 1},     // cheeks forward
        {1.55, 0.0, 0.15, Vec3(0, 0, -3), 0},     // nose
        {1.25, 0.35, 0.12, Vec3(0, 1.5, 0), 1},   // lids
    };
    const int n = static_cast<int>(dirs.size());
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(3 * n, k_exp);
    for (int k = 0; k < k_exp; ++k) {
        const Field& f = base[k % 6];
        const double scale = 1.0 + k / 6;
        for (int v = 0; v < n; ++v) {
            const Vec3& d = dirs[v];
            const double theta = std::acos(std::clamp(-d.y(), -1.0, 1.0));
            const double phi = std::atan2(d.x(), -d.z());
            for (int side = 0; side < (f.mirror > 0 ? 2 : 1); ++side) {
                const double sp = side == 0 ? f.phi : -f.phi;
                const double r2 = (theta - f.theta) * (theta - f.theta) + (phi - sp) * (phi - sp);
                const double w = std::exp(-r2 / (2 * f.width * f.width));
                Vec3 m = f.move * scale;
                if (side == 1) {
                    m.x() = -m.x();
                }
                e.block<3, 1>(3 * v, k) += w * m;
            }
        }
    }
    return e;
}

} // namespace

morphable::MorphableModel make_synthetic_3dmm(int n_shapes, int k_id, std::uint64_t seed, int k_exp,
                                              const Tessellation& t, const ShapeOptions& shape)
{
    require(k_id >= 0 && k_exp >= 0, ErrorCode::InvalidArgument, "basis sizes must be non-negative");
    require(n_shapes > k_id, ErrorCode::InvalidArgument, "need more shapes than identity components");
    std::vector<TriangleMesh> meshes;
    for (int i = 0; i < n_shapes; ++i) {
        meshes.push_back(tessellate(make_shape(mix_seed(seed, static_cast<std::uint64_t>(i)), shape), t));
    }
    const Eigen::Index rows = 3 * static_cast<Eigen::Index>(meshes.front().vertices.size());
    Eigen::MatrixXd x(rows, n_shapes);
    for (int i = 0; i < n_shapes; ++i) {
        x.col(i) = stack(meshes[i].vertices);
    }
    const Eigen::VectorXd mean = x.rowwise().mean();
    x.colwise() -= mean;
    require(x.allFinite(), ErrorCode::NonFinite, "shape samples are not finite");

    morphable::MorphableModel m;
    m.name = "synthetic-ellipsoid";
    m.mean_shape = meshes.front();
    for (std::size_t v = 0; v < m.mean_shape.vertices.size(); ++v) {
        m.mean_shape.vertices[v] = mean.segment<3>(3 * static_cast<Eigen::Index>(v));
    }
    m.mean_shape.normals = mesh_vertex_normals(m.mean_shape);
    m.id_basis = Eigen::MatrixXd::Zero(rows, k_id);
    if (k_id > 0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
        const auto& sv = svd.singularValues();
        require(sv.allFinite(), ErrorCode::Singular, "shape covariance decomposition failed");
        const double norm = 1.0 / std::sqrt(static_cast<double>(std::max(1, n_shapes - 1)));
        const double tiny = 1e-12 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
        for (int k = 0; k < k_id; ++k) {
            if (sv(k) > tiny) {
                m.id_basis.col(k) = svd.matrixU().col(k) * sv(k) * norm;
            }
        }
    }
    m.exp_basis = expression_fields(parameter_directions(t), k_exp);
    m.landmark_indices = landmark_sites(t);
    m.validate();
    return m;
}

void DatasetConfig::validate() const
{
    require(n_train >= 0 && n_test >= 0 && total() > 0, ErrorCode::InvalidArgument, "dataset needs samples");
    require(image_size >= 16 && image_size % 8 == 0, ErrorCode::InvalidArgument,
            "image size must be a multiple of 8, at least 16");
    require(grid >= 16, ErrorCode::InvalidArgument, "grid must be at least 16");
    require(box_mm > 2 * shape.max_axis + 2 * shape.max_height, ErrorCode::InvalidArgument,
            "box too small for the shapes");
    require(camera_distance_mm > 10 * box_mm, ErrorCode::InvalidArgument, "camera too close");
    double sum = 0.0;
    for (double w : bucket_weights) {
        require(w >= 0.0, ErrorCode::InvalidArgument, "bucket weights must be non-negative");
        sum += w;
    }
    require(sum > 0.0, ErrorCode::InvalidArgument, "bucket weights sum to zero");
}

nlohmann::json to_json(const DatasetConfig& c)
{
    return {{"n_train", c.n_train},
            {"n_test", c.n_test},
            {"image_size", c.image_size},
            {"grid", c.grid},
            {"box_mm", c.box_mm},
            {"camera_distance_mm", c.camera_distance_mm},
            {"seed", c.seed},
            {"bucket_weights", c.bucket_weights},
            {"tessellation", {{"rings", c.tessellation.rings}, {"segments", c.tessellation.segments}}}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j, DatasetConfig c)
{
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.image_size = j.value("image_size", c.image_size);
    c.grid = j.value("grid", c.grid);
    c.box_mm = j.value("box_mm", c.box_mm);
    c.camera_distance_mm = j.value("camera_distance_mm", c.camera_distance_mm);
    c.seed = j.value("seed", c.seed);
    if (j.contains("bucket_weights")) {
        c.bucket_weights = j.at("bucket_weights").get<std::array<double, 4>>();
    }
    if (j.contains("tessellation")) {
        c.tessellation.rings = j["tessellation"].value("rings", c.tessellation.rings);
        c.tessellation.segments = j["tessellation"].value("segments", c.tessellation.segments);
    }
    return c;
}

CropAlignedCamera crop_camera(const DatasetConfig& c)
{
    const Vec3 center(0, 0, c.camera_distance_mm);
    const Vec3 half = Vec3::Constant(0.5 * c.box_mm);
    return {Box3{center - half, center + half}, c.image_size, c.image_size};
}

PerspectiveCamera view_camera(const DatasetConfig& c)
{
    PerspectiveCamera cam;
    cam.width = c.image_size;
    cam.height = c.image_size;
    cam.focal = 0.5 * c.image_size * c.camera_distance_mm / (0.5 * c.box_mm);
    cam.principal = Vec2(0.5 * c.image_size, 0.5 * c.image_size);
    return cam;
}

RigidPose sample_pose(std::mt19937_64& rng, const DatasetConfig& c, double* angle_deg)
{
    static const double edges[5] = {0, 5, 30, 60, 90};
    std::discrete_distribution<int> bucket(c.bucket_weights.begin(), c.bucket_weights.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const int b = bucket(rng);
    const double angle = edges[b] + (edges[b + 1] - edges[b]) * u(rng);
    Vec3 axis(0.25 * g(rng), 1.0, 0.1 * g(rng));
    axis.normalize();
    if (u(rng) < 0.5) {
        axis = -axis;
    }
    if (angle_deg) {
        *angle_deg = angle;
    }
    return RigidPose::from_axis_angle(axis * deg2rad(angle), Vec3(0, 0, c.camera_distance_mm));
}

Sample make_sample(const DatasetConfig& c, int index)
{
    c.validate();
    std::mt19937_64 rng(mix_seed(c.seed, static_cast<std::uint64_t>(index)));
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "s%04d", index);
    s.id = id;
    s.split = index < c.n_train ? "train" : "test";
    s.shape = make_shape(rng(), c.shape);
    s.pose = sample_pose(rng, c, &s.pose_deg);
    s.mesh = transformed(tessellate(s.shape, c.tessellation), s.pose);
    s.camera = view_camera(c);
    s.crop = crop_camera(c);
    s.render = raster::rasterize(s.mesh, s.camera);
    s.normals = raster::render_normal_maps(s.mesh, s.camera);
    s.back_depth = raster::render_back_depth(s.mesh, s.camera);
    s.sdf = sample_sdf(s.shape, s.pose, ScalarField3({c.grid, c.grid, c.grid}, s.crop.box));
    const auto sites = landmark_sites(c.tessellation);
    for (int v : sites) {
        const auto p = project(s.camera, s.mesh.vertices[v]);
        require(p.has_value(), ErrorCode::BehindCamera, "landmark behind the camera");
        s.landmarks.emplace_back(p->u, p->v);
    }
    return s;
}

void write_sample(const std::filesystem::path& dir, const Sample& s)
{
    std::filesystem::create_directories(dir);
    io::write_png(dir / "image.png", s.render.rgb);
    io::write_png(dir / "mask.png", s.render.labels, true);
    io::write_pfm(dir / "depth.pfm", s.render.depth);
    io::write_pfm(dir / "back_depth.pfm", s.back_depth);
    io::write_pfm(dir / "front_normal.pfm", s.normals.front);
    io::write_pfm(dir / "back_normal.pfm", s.normals.back);
    io::write_obj(dir / "mesh.obj", s.mesh);
    io::write_json(dir / "camera.json", {{"perspective", io::to_json(Camera{s.camera})},
                                         {"crop", io::to_json(Camera{s.crop})}});
    io::write_json(dir / "params.json", {{"id", s.id},
                                         {"split", s.split},
                                         {"shape", s.shape.to_json()},
                                         {"pose", io::to_json(s.pose)},
                                         {"pose_deg", s.pose_deg}});
    io::write_json(dir / "landmarks.json", morphable::landmarks_to_json(s.landmarks));
    io::write_sdf(dir / "gt.sdf", s.sdf, io::SdfPrecision::Float64);
}

void build_dataset(const std::filesystem::path& out, const DatasetConfig& c)
{
    c.validate();
    std::filesystem::create_directories(out / "pairs");
    nlohmann::json entries = nlohmann::json::array();
    for (int i = 0; i < c.total(); ++i) {
        const Sample s = make_sample(c, i);
        write_sample(out / "pairs" / s.id, s);
        entries.push_back({{"id", s.id}, {"split", s.split}, {"pose_deg", s.pose_deg}});
    }
    io::write_json(out / "manifest.json", {{"config", to_json(c)}, {"samples", entries}});
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dataset)
{
    const auto j = io::read_json(dataset / "manifest.json");
    std::vector<ManifestEntry> out;
    for (const auto& e : j.at("samples")) {
        out.push_back({e.at("id").get<std::string>(), e.value("split", "test"), e.value("pose_deg", 0.0)});
    }
    return out;
}

namespace {

// Closest point on triangle abc; `region` is 0 for the face interior, 1 for an
// edge or a corner.
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, int& region)
{
    region = 1;
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) {
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        return a + ab * (d1 / (d1 - d3));
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) {
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        return a + ac * (d2 / (d2 - d6));
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    region = 0;
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

} // namespace

ScalarField3 mesh_sdf(const TriangleMesh& mesh, const ScalarField3& lattice)
{
    require(!mesh.faces.empty(), ErrorCode::InvalidArgument, "mesh has no faces");
    const auto vn = mesh_vertex_normals(mesh);
    std::vector<std::vector<int>> incident(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int v : mesh.faces[f]) {
            incident[v].push_back(static_cast<int>(f));
        }
    }
    const bench::KdTree tree(mesh.vertices);
    ScalarField3 out(lattice.dims, lattice.box);
    const int nx = lattice.dims[0], ny = lattice.dims[1];
    parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const int i = static_cast<int>(n % nx);
            const int j = static_cast<int>((n / nx) % ny);
            const int k = static_cast<int>(n / (static_cast<std::size_t>(nx) * ny));
            const Vec3 p = out.node_position(i, j, k);
            const int nearest = tree.nearest(p).index;
            double best = std::numeric_limits<double>::infinity();
            double sign = 1.0;
            // faces around the nearest vertex and around their corners
            std::vector<int> candidates;
            for (int f : incident[nearest]) {
                for (int v : mesh.faces[f]) {
                    candidates.insert(candidates.end(), incident[v].begin(), incident[v].end());
                }
            }
            for (int f : candidates) {
                const auto& face = mesh.faces[f];
                int region = 0;
                const Vec3 q = closest_on_triangle(p, mesh.vertices[face[0]], mesh.vertices[face[1]],
                                                   mesh.vertices[face[2]], region);
                const double d = (p - q).norm();
                if (d < best) {
                    best = d;
                    Vec3 normal = face_cross(mesh, f);
                    if (region != 0) {
                        int closest_corner = face[0];
                        for (int v : face) {
                            if ((mesh.vertices[v] - q).squaredNorm() <
                                (mesh.vertices[closest_corner] - q).squaredNorm()) {
                                closest_corner = v;
                            }
                        }
                        normal = vn[closest_corner] + normal.normalized();
                    }
                    sign = (p - q).dot(normal) < 0.0 ? -1.0 : 1.0;
                }
            }
            out.values[n] = sign * best;
        }
    });
    return out;
}

neural::TrainSample load_training_sample(const std::filesystem::path& dir)
{
    neural::TrainSample s;
    s.image = io::read_png(dir / "image.png");
    s.labels = io::read_png(dir / "mask.png", true);
    const auto cam = io::camera_from_json(io::read_json(dir / "camera.json").at("crop"));
    s.camera = std::get<CropAlignedCamera>(cam);
    s.sdf = io::read_sdf(dir / "gt.sdf");
    s.front_normals = io::read_pfm(dir / "front_normal.pfm");
    s.back_normals = io::read_pfm(dir / "back_normal.pfm");
    return s;
}

} // namespace hsdf::synth
