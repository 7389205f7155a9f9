#include "hsdf/morphable/model.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"

#include <cstring>
#include <set>

namespace hsdf::morphable {

void MorphableModel::validate() const
{
    mean_shape.validate();
    const Eigen::Index n = 3 * static_cast<Eigen::Index>(mean_shape.vertices.size());
    require(id_basis.rows() == n || id_basis.cols() == 0, ErrorCode::SizeMismatch, "identity basis length != 3V");
    require(exp_basis.rows() == n || exp_basis.cols() == 0, ErrorCode::SizeMismatch,
            "expression basis length != 3V");
    require(landmark_indices.size() >= 6, ErrorCode::InvalidArgument, "need at least 6 landmarks");
    std::set<int> seen;
    for (int i : landmark_indices) {
        require(i >= 0 && i < num_vertices(), ErrorCode::InvalidArgument, "landmark index out of range");
        require(seen.insert(i).second, ErrorCode::InvalidArgument, "duplicate landmark index");
    }
}

FitParams neutral_params(const MorphableModel& model, const PerspectiveCamera& camera)
{
    FitParams p;
    p.id_coeffs = Eigen::VectorXd::Zero(model.num_id());
    p.exp_coeffs = Eigen::VectorXd::Zero(model.num_exp());
    p.camera = camera;
    return p;
}

TriangleMesh synthesize_shape(const MorphableModel& model, const Eigen::VectorXd& id, const Eigen::VectorXd& ex)
{
    require(id.size() == model.num_id(), ErrorCode::SizeMismatch, "identity coefficient count mismatch");
    require(ex.size() == model.num_exp(), ErrorCode::SizeMismatch, "expression coefficient count mismatch");
    TriangleMesh mesh = model.mean_shape;
    mesh.normals.clear();
    if (model.num_id() == 0 && model.num_exp() == 0) {
        return mesh;
    }
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(3 * model.num_vertices());
    if (model.num_id() > 0) {
        offset += model.id_basis * id;
    }
    if (model.num_exp() > 0) {
        offset += model.exp_basis * ex;
    }
    for (int v = 0; v < model.num_vertices(); ++v) {
        mesh.vertices[v] += offset.segment<3>(3 * v);
    }
    return mesh;
}

TriangleMesh posed_shape(const MorphableModel& model, const FitParams& params)
{
    return transformed(synthesize_shape(model, params.id_coeffs, params.exp_coeffs), params.pose);
}

std::vector<Vec2> project_landmarks(const MorphableModel& model, const FitParams& params)
{
    const TriangleMesh mesh = synthesize_shape(model, params.id_coeffs, params.exp_coeffs);
    std::vector<Vec2> out;
    out.reserve(model.landmark_indices.size());
    for (int idx : model.landmark_indices) {
        const auto pr = project(params.camera, params.pose.apply(mesh.vertices[idx]));
        require(pr.has_value(), ErrorCode::BehindCamera, "landmark " + std::to_string(idx) + " behind camera");
        out.emplace_back(pr->u, pr->v);
    }
    return out;
}

void write_model(const std::filesystem::path& path, const MorphableModel& model)
{
    model.validate();
    nlohmann::json hdr;
    hdr["name"] = model.name;
    hdr["V"] = model.num_vertices();
    hdr["K_id"] = model.num_id();
    hdr["K_exp"] = model.num_exp();
    hdr["landmark_indices"] = model.landmark_indices;
    nlohmann::json faces = nlohmann::json::array();
    for (const Face& f : model.mean_shape.faces) {
        faces.push_back({f[0], f[1], f[2]});
    }
    hdr["faces"] = faces;
    hdr["face_labels"] = model.mean_shape.face_labels;
    const std::filesystem::path raw = path.string() + ".raw";
    hdr["payload"] = raw.filename().string();
    hdr["dtype"] = "float32-le";
    io::write_json(path, hdr);

    std::vector<float> buf;
    buf.reserve(3 * model.num_vertices() * (1 + model.num_id() + model.num_exp()));
    for (const Vec3& v : model.mean_shape.vertices) {
        for (int c = 0; c < 3; ++c) {
            buf.push_back(static_cast<float>(v[c]));
        }
    }
    for (const Eigen::MatrixXd* basis : {&model.id_basis, &model.exp_basis}) {
        for (Eigen::Index k = 0; k < basis->cols(); ++k) {
            for (Eigen::Index r = 0; r < basis->rows(); ++r) {
                buf.push_back(static_cast<float>((*basis)(r, k)));
            }
        }
    }
    io::write_bytes(raw, buf.data(), buf.size() * sizeof(float));
}

MorphableModel read_model(const std::filesystem::path& path)
{
    const auto hdr = io::read_json(path);
    MorphableModel m;
    m.name = hdr.value("name", "");
    const int nv = hdr.at("V").get<int>();
    const int kid = hdr.at("K_id").get<int>();
    const int kexp = hdr.at("K_exp").get<int>();
    m.landmark_indices = hdr.at("landmark_indices").get<std::vector<int>>();
    for (const auto& f : hdr.at("faces")) {
        m.mean_shape.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
    }
    m.mean_shape.face_labels = hdr.value("face_labels", std::vector<int>{});
    const auto bytes = io::read_bytes(path.parent_path() / hdr.at("payload").get<std::string>());
    const std::size_t n = 3 * static_cast<std::size_t>(nv);
    require(bytes.size() == n * (1 + kid + kexp) * sizeof(float), ErrorCode::Io, "model payload size mismatch");
    std::vector<float> buf(bytes.size() / sizeof(float));
    std::memcpy(buf.data(), bytes.data(), bytes.size());
    m.mean_shape.vertices.resize(nv);
    for (int v = 0; v < nv; ++v) {
        m.mean_shape.vertices[v] = Vec3(buf[3 * v], buf[3 * v + 1], buf[3 * v + 2]);
    }
    std::size_t off = n;
    m.id_basis.resize(static_cast<Eigen::Index>(n), kid);
    m.exp_basis.resize(static_cast<Eigen::Index>(n), kexp);
    for (Eigen::MatrixXd* basis : {&m.id_basis, &m.exp_basis}) {
        for (Eigen::Index k = 0; k < basis->cols(); ++k) {
            for (Eigen::Index r = 0; r < basis->rows(); ++r) {
                (*basis)(r, k) = buf[off++];
            }
        }
    }
    m.validate();
    return m;
}

nlohmann::json params_to_json(const FitParams& p)
{
    return {{"id_coeffs", std::vector<double>(p.id_coeffs.data(), p.id_coeffs.data() + p.id_coeffs.size())},
            {"exp_coeffs", std::vector<double>(p.exp_coeffs.data(), p.exp_coeffs.data() + p.exp_coeffs.size())},
            {"pose", io::to_json(p.pose)},
            {"camera", io::to_json(Camera(p.camera))}};
}

FitParams params_from_json(const nlohmann::json& j)
{
    FitParams p;
    const auto id = j.at("id_coeffs").get<std::vector<double>>();
    const auto ex = j.at("exp_coeffs").get<std::vector<double>>();
    p.id_coeffs = Eigen::Map<const Eigen::VectorXd>(id.data(), static_cast<Eigen::Index>(id.size()));
    p.exp_coeffs = Eigen::Map<const Eigen::VectorXd>(ex.data(), static_cast<Eigen::Index>(ex.size()));
    p.pose = io::pose_from_json(j.at("pose"));
    const Camera cam = io::camera_from_json(j.at("camera"));
    require(std::holds_alternative<PerspectiveCamera>(cam), ErrorCode::InvalidArgument,
            "fit camera must be perspective");
    p.camera = std::get<PerspectiveCamera>(cam);
    return p;
}

nlohmann::json landmarks_to_json(const std::vector<Vec2>& pts)
{
    nlohmann::json j = nlohmann::json::array();
    for (const Vec2& p : pts) {
        j.push_back({p.x(), p.y()});
    }
    return j;
}

std::vector<Vec2> landmarks_from_json(const nlohmann::json& j)
{
    std::vector<Vec2> pts;
    for (const auto& p : j) {
        pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    return pts;
}

} // namespace hsdf::morphable
