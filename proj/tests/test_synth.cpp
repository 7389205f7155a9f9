#include "hsdf/bench/kdtree.hpp"
#include "hsdf/bench/metrics.hpp"
#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"
#include "hsdf/neural/train.hpp"
#include "hsdf/reconstruct/marching_cubes.hpp"
#include "hsdf/synth/dataset.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <set>

using namespace hsdf;
using namespace hsdf::synth;

namespace {

DatasetConfig small_config()
{
    DatasetConfig c;
    c.n_train = 2;
    c.n_test = 1;
    c.image_size = 32;
    c.grid = 24;
    c.seed = 17;
    c.tessellation = Tessellation{24, 48};
    return c;
}

Vec3 sdf_gradient(const AnalyticShape& s, const Vec3& p, double h = 1e-3)
{
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 d = Vec3::Zero();
        d[a] = h;
        g[a] = (s.sdf(p + d) - s.sdf(p - d)) / (2 * h);
    }
    return g;
}

std::vector<std::string> listing(const std::filesystem::path& root)
{
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), root).string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("seeded shapes")
{
    const ShapeOptions o;
    const auto a = make_shape(5);
    const auto b = make_shape(5);
    CHECK(a.to_json() == b.to_json());
    CHECK(shape_hash(a) == shape_hash(b));
    std::set<std::uint64_t> hashes;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = make_shape(seed);
        hashes.insert(shape_hash(s));
        for (int k = 0; k < 3; ++k) {
            CHECK(s.semi_axes[k] >= o.min_axis);
            CHECK(s.semi_axes[k] <= o.max_axis);
        }
        CHECK(s.bumps.size() >= static_cast<std::size_t>(o.min_bumps));
        CHECK(s.bumps.size() <= static_cast<std::size_t>(o.max_bumps));
        for (const auto& bump : s.bumps) {
            CHECK(bump.radius >= o.min_radius);
            CHECK(bump.radius <= o.max_radius);
            CHECK(bump.height <= o.max_height);
            CHECK(bump.height <= o.max_slope * bump.radius + 1e-12);
            CHECK(std::abs(s.ellipsoid_distance(bump.center)) < 1e-9);
        }
        CHECK(AnalyticShape::from_json(s.to_json()).to_json() == s.to_json());
    }
    CHECK(hashes.size() == 100);
}

TEST_CASE("pure ellipsoid distance against a dense point oracle")
{
    ShapeOptions o;
    o.min_bumps = o.max_bumps = 0;
    const auto s = make_shape(3, o);
    REQUIRE(s.bumps.empty());
    // dense surface cloud, about 0.5 mm apart
    std::vector<Vec3> cloud;
    const int rings = 600, segs = 1200;
    for (int i = 0; i <= rings; ++i) {
        const double th = kPi * i / rings;
        for (int j = 0; j < segs; ++j) {
            const double ph = 2 * kPi * j / segs;
            cloud.emplace_back(s.semi_axes.x() * std::sin(th) * std::cos(ph), s.semi_axes.y() * std::sin(th) * std::sin(ph),
                               s.semi_axes.z() * std::cos(th));
        }
    }
    const auto tree = bench::KdTree(cloud);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-140, 140);
    int checked = 0;
    while (checked < 300) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const double level = (p.array() / s.semi_axes.array()).square().sum();
        const double oracle = tree.nearest(p).distance * (level < 1 ? -1 : 1);
        if (std::abs(oracle) < 5.0) continue;
        CHECK(std::abs(s.sdf(p) - oracle) <= 0.01 * std::abs(oracle));
        ++checked;
    }
}

TEST_CASE("bumped shape SDF properties")
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-130, 130);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto s = make_shape(seed);
        const double excess = s.lipschitz_excess();
        CHECK(excess <= 0.2);
        const auto m = tessellate(s, Tessellation{100, 200});
        const double tol = 1e-2 * s.semi_axes.minCoeff();
        double worst = 0.0;
        for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs(s.sdf(v)));
        CHECK(worst <= tol);
        for (int i = 0; i < 2000; ++i) {
            const Vec3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
            CHECK(std::abs(s.sdf(p) - s.sdf(q)) <= (p - q).norm() * (1 + excess) + 1e-9);
        }
        // short steps around the surface, where the bumps tilt the field
        std::normal_distribution<double> g(0, 1);
        for (std::size_t v = 0; v < m.vertices.size(); v += 11) {
            const Vec3 p = m.vertices[v] + 3.0 * Vec3(g(rng), g(rng), g(rng));
            const Vec3 q = p + 0.5 * Vec3(g(rng), g(rng), g(rng));
            CHECK(std::abs(s.sdf(p) - s.sdf(q)) <= (p - q).norm() * (1 + excess) + 1e-9);
        }
        // vertex normals agree with the SDF gradient
        for (std::size_t v = 0; v < m.vertices.size(); v += 37) {
            const Vec3 g = sdf_gradient(s, m.vertices[v]).normalized();
            CHECK(g.dot(m.normals[v]) > std::cos(deg2rad(3.0)));
        }
        for (int label : m.face_labels) {
            CHECK(label >= kSkin);
            CHECK(label <= kFeature);
        }
    }
}

TEST_CASE("synthetic morphable model")
{
    const Tessellation t{12, 24};
    SUBCASE("identical shapes give a zero basis")
    {
        ShapeOptions o;
        o.min_axis = o.max_axis = 80.0;
        o.min_bumps = o.max_bumps = 0;
        const auto m = make_synthetic_3dmm(6, 3, 1, 2, t, o);
        CHECK(m.id_basis.cols() == 3);
        CHECK(m.id_basis.squaredNorm() < 1e-10);
    }
    SUBCASE("full basis reproduces the training shapes")
    {
        const int n = 8;
        const auto m = make_synthetic_3dmm(n, n - 1, 9, 2, t);
        const Eigen::Index rows = m.id_basis.rows();
        Eigen::VectorXd mean(rows);
        for (int v = 0; v < m.num_vertices(); ++v) mean.segment<3>(3 * v) = m.mean_shape.vertices[v];
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m.id_basis);
        for (int i = 0; i < n; ++i) {
            const auto mesh = tessellate(make_shape(mix_seed(9, i)), t);
            Eigen::VectorXd x(rows);
            for (int v = 0; v < m.num_vertices(); ++v) x.segment<3>(3 * v) = mesh.vertices[v];
            const Eigen::VectorXd c = qr.solve(x - mean);
            const double rms = std::sqrt((m.id_basis * c - (x - mean)).squaredNorm() / m.num_vertices());
            CHECK(rms < 1e-6);
            // and through the synthesis path
            const auto synth = morphable::synthesize_shape(m, c, Eigen::VectorXd::Zero(m.num_exp()));
            double worst = 0.0;
            for (int v = 0; v < m.num_vertices(); ++v) {
                worst = std::max(worst, (synth.vertices[v] - mesh.vertices[v]).norm());
            }
            CHECK(worst < 1e-6);
        }
        for (int a = 0; a < m.num_id(); ++a) {
            for (int b = a + 1; b < m.num_id(); ++b) {
                const double cosine =
                    m.id_basis.col(a).dot(m.id_basis.col(b)) / (m.id_basis.col(a).norm() * m.id_basis.col(b).norm());
                CHECK(std::abs(cosine) < 1e-8);
            }
        }
        // columns are ordered by variance
        for (int a = 0; a + 1 < m.num_id(); ++a) CHECK(m.id_basis.col(a).norm() >= m.id_basis.col(a + 1).norm());
    }
    SUBCASE("arguments")
    {
        CHECK_THROWS_AS(make_synthetic_3dmm(3, 3, 0, 2, t), Error);
        CHECK_THROWS_AS(make_synthetic_3dmm(3, -1, 0, 2, t), Error);
        const auto m = make_synthetic_3dmm(5, 2, 0, 3, t);
        CHECK(m.num_exp() == 3);
        CHECK(m.landmark_indices == landmark_sites(t));
        CHECK(m.landmark_indices.size() >= 6);
    }
}

TEST_CASE("pose sampling follows the bucket weights")
{
    DatasetConfig c;
    std::mt19937_64 rng(12);
    const int n = 4000;
    int counts[4] = {0, 0, 0, 0};
    const double edges[5] = {0, 5, 30, 60, 90};
    for (int i = 0; i < n; ++i) {
        double deg = -1;
        const RigidPose p = sample_pose(rng, c, &deg);
        REQUIRE(deg >= 0);
        REQUIRE(deg <= 90);
        CHECK(rad2deg(rotation_angle_between(p.rotation, Mat3::Identity())) == doctest::Approx(deg).epsilon(1e-9));
        CHECK(p.translation == Vec3(0, 0, c.camera_distance_mm));
        for (int b = 0; b < 4; ++b) counts[b] += deg >= edges[b] && deg < edges[b + 1];
    }
    double total = 0;
    for (double w : c.bucket_weights) total += w;
    for (int b = 0; b < 4; ++b) {
        const double p = c.bucket_weights[b] / total;
        CHECK(std::abs(counts[b] - n * p) <= 3 * std::sqrt(n * p * (1 - p)));
    }
    // large-pose share of the default mix
    CHECK(c.bucket_weights[3] / total == doctest::Approx(0.12));
}

TEST_CASE("dataset samples carry exact ground truth")
{
    DatasetConfig c = small_config();
    c.image_size = 64;
    c.grid = 32;
    c.tessellation = Tessellation{40, 80};
    for (int index = 0; index < 3; ++index) {
        CAPTURE(index);
        const Sample s = make_sample(c, index);
        CHECK(s.split == (index < 2 ? "train" : "test"));
        // stored grid equals the analytic SDF at every voxel centre
        double worst = 0.0;
        for (int k = 0; k < c.grid; ++k) {
            for (int j = 0; j < c.grid; ++j) {
                for (int i = 0; i < c.grid; ++i) {
                    const Vec3 p = s.pose.apply_inverse(s.sdf.node_position(i, j, k));
                    worst = std::max(worst, std::abs(s.sdf.at(i, j, k) - s.shape.sdf(p)));
                }
            }
        }
        CHECK(worst <= 1e-6);

        // front normals against the analytic gradient at the visible point
        int covered = 0, good = 0;
        for (int y = 0; y < c.image_size; ++y) {
            for (int x = 0; x < c.image_size; ++x) {
                if (s.render.mask.at(x, y) == 0) continue;
                const Vec3 d = ray_direction(s.camera, x + 0.5, y + 0.5);
                const Vec3 hit = d * (s.render.depth.at(x, y) / d.z());
                const Vec3 g = s.pose.rotation * sdf_gradient(s.shape, s.pose.apply_inverse(hit)).normalized();
                const Vec3 n(s.normals.front.at(x, y, 0), s.normals.front.at(x, y, 1), s.normals.front.at(x, y, 2));
                ++covered;
                good += g.dot(n.normalized()) > std::cos(deg2rad(2.0));
            }
        }
        MESSAGE("normals within 2 degrees: " << good << "/" << covered);
        CHECK(covered > 200);
        CHECK(good >= 0.95 * covered);

        // marching cubes on the stored grid against the stored mesh
        const auto mc = reconstruct::marching_cubes(s.sdf);
        const double cd = bench::chamfer_distance(mc, s.mesh);
        const double voxel = s.sdf.spacing().x();
        MESSAGE("self-consistency CD " << cd << " mm, voxel " << voxel << " mm");
        CHECK(cd < 1.5 * voxel);

        CHECK(s.landmarks.size() == landmark_sites(c.tessellation).size());
        for (const Vec2& l : s.landmarks) {
            CHECK(l.x() >= 0);
            CHECK(l.x() <= c.image_size);
        }
    }
}

TEST_CASE("mesh distance field")
{
    const auto shape = make_shape(8);
    const auto mesh = tessellate(shape, Tessellation{60, 120});
    const ScalarField3 lattice({20, 20, 20}, Box3{Vec3(-120, -120, -120), Vec3(120, 120, 120)});
    const auto f = mesh_sdf(mesh, lattice);
    REQUIRE(f.same_lattice(lattice));
    std::vector<double> err;
    for (int k = 0; k < 20; ++k) {
        for (int j = 0; j < 20; ++j) {
            for (int i = 0; i < 20; ++i) {
                const double exact = shape.sdf(f.node_position(i, j, k));
                // deep inside, the foot-point construction is not a true distance
                if (std::abs(exact) < 20) err.push_back(std::abs(f.at(i, j, k) - exact));
                if (std::abs(exact) > 5) CHECK((f.at(i, j, k) < 0) == (exact < 0));
            }
        }
    }
    std::sort(err.begin(), err.end());
    MESSAGE("mesh SDF error median " << err[err.size() / 2] << " max " << err.back());
    CHECK(err.size() > 500);
    CHECK(err[err.size() / 2] < 0.1);
    CHECK(err.back() < 1.0);
}

TEST_CASE("dataset directory")
{
    test::TempDir dir("dataset");
    const DatasetConfig c = small_config();
    build_dataset(dir / "a", c);
    build_dataset(dir / "b", c);
    const auto files = listing(dir / "a");
    CHECK(files == listing(dir / "b"));
    for (const auto& f : files) CHECK(io::read_bytes(dir / "a" / f) == io::read_bytes(dir / "b" / f));
    for (const char* name : {"image.png", "mask.png", "depth.pfm", "back_depth.pfm", "front_normal.pfm",
                             "back_normal.pfm", "mesh.obj", "camera.json", "params.json", "landmarks.json", "gt.sdf"}) {
        CHECK(std::filesystem::exists(dir / "a" / "pairs" / "s0000" / name));
    }

    const auto manifest = read_manifest(dir / "a");
    REQUIRE(manifest.size() == 3);
    CHECK(manifest[0].id == "s0000");
    CHECK(manifest[2].split == "test");
    const auto j = io::read_json(dir / "a" / "manifest.json");
    CHECK(dataset_config_from_json(j.at("config")).n_train == 2);
    for (int i = 0; i < 3; ++i) {
        const Sample s = make_sample(c, i);
        CHECK(manifest[i].pose_deg == s.pose_deg);
        const auto t = load_training_sample(dir / "a" / "pairs" / s.id);
        CHECK(t.sdf.values == s.sdf.values);
        CHECK(t.camera.box.min == s.crop.box.min);
        CHECK(t.front_normals.data == s.normals.front.data);
        for (std::size_t p = 0; p < t.labels.data.size(); ++p) CHECK(t.labels.data[p] == s.render.labels.data[p]);
    }

    // a regular file where the output directory should go
    std::ofstream(dir / "blocker") << "x";
    CHECK_THROWS(build_dataset(dir / "blocker" / "out", c));

    SUBCASE("single near-frontal sample")
    {
        DatasetConfig one = small_config();
        one.n_train = 1;
        one.n_test = 0;
        one.bucket_weights = {1, 0, 0, 0};
        build_dataset(dir / "one", one);
        const auto m = read_manifest(dir / "one");
        REQUIRE(m.size() == 1);
        CHECK(m[0].pose_deg < 5.0);
        const auto mj = io::read_json(dir / "one" / "manifest.json");
        CHECK(mj.at("samples").at(0).contains("id"));
        CHECK(mj.at("samples").at(0).contains("split"));
        CHECK(mj.at("samples").at(0).contains("pose_deg"));
        CHECK(mj.contains("config"));
    }
}

TEST_CASE("dataset configuration")
{
    DatasetConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.n_train == 200);
    CHECK(c.n_test == 40);
    CHECK(c.image_size == 128);
    const auto back = dataset_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    auto partial = dataset_config_from_json({{"n_train", 7}, {"grid", 32}});
    CHECK(partial.n_train == 7);
    CHECK(partial.grid == 32);
    CHECK(partial.n_test == 40);

    auto bad = [](auto edit) {
        DatasetConfig d;
        edit(d);
        CHECK_THROWS_AS(d.validate(), Error);
    };
    bad([](DatasetConfig& d) { d.n_train = d.n_test = 0; });
    bad([](DatasetConfig& d) { d.n_test = -1; });
    bad([](DatasetConfig& d) { d.image_size = 20; });
    bad([](DatasetConfig& d) { d.grid = 8; });
    bad([](DatasetConfig& d) { d.box_mm = 150; });
    bad([](DatasetConfig& d) { d.camera_distance_mm = 1000; });
    bad([](DatasetConfig& d) { d.bucket_weights = {0, 0, 0, 0}; });
    bad([](DatasetConfig& d) { d.bucket_weights = {1, -1, 0, 0}; });

    // the crop box is centred on the object and matches the view at its centre
    const auto crop = crop_camera(c);
    const auto view = view_camera(c);
    CHECK(crop.box.center().isApprox(Vec3(0, 0, c.camera_distance_mm)));
    CHECK(crop.box.size().x() == doctest::Approx(c.box_mm));
    const auto corner = project(view, Vec3(crop.box.min.x(), crop.box.min.y(), c.camera_distance_mm));
    REQUIRE(corner.has_value());
    CHECK(corner->u == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(corner->v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("training on samples does not depend on where buffers are allocated")
{
    DatasetConfig c;
    c.n_train = 6;
    c.n_test = 0;
    c.image_size = 32;
    c.grid = 16;
    c.seed = 1;
    std::vector<neural::TrainSample> data;
    for (int i = 0; i < c.total(); ++i) {
        const auto s = make_sample(c, i);
        data.push_back({s.render.rgb, s.render.labels, s.crop, s.sdf, s.normals.front, s.normals.back});
    }
    neural::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr = 0.01;
    cfg.seed = 3;
    std::vector<double> first;
    // each round shifts the heap by a few more bytes
    std::vector<std::unique_ptr<char[]>> offsets;
    for (int round = 0; round < 12; ++round) {
        offsets.emplace_back(new char[8 * round * round + 24]);
        neural::NormalRegressor net;
        std::mt19937_64 rng(13);
        net.init(rng);
        neural::train_normals(net, data, cfg);
        std::vector<neural::ParamRef> refs;
        net.params(refs);
        std::vector<double> flat;
        for (const auto& p : refs) flat.insert(flat.end(), p.value, p.value + p.size);
        if (round == 0) {
            first = flat;
        } else {
            CAPTURE(round);
            CHECK(flat == first);
        }
    }
}
