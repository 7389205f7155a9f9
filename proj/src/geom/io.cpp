#include "hsdf/geom/io.hpp"

#include "hsdf/geom/error.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace hsdf::io {

namespace {

std::string fmt_double(double v)
{
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), end);
}

std::ofstream open_out(const fs::path& path, bool binary)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const fs::path& path, bool binary)
{
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot open for reading: " + path.string());
    return is;
}

} // namespace

// ---------------------------------------------------------------- OBJ

void write_obj(const fs::path& path, const TriangleMesh& mesh)
{
    std::ostringstream os;
    os << "# hsdf mesh\n";
    for (const Vec3& v : mesh.vertices) {
        os << "v " << fmt_double(v.x()) << ' ' << fmt_double(v.y()) << ' ' << fmt_double(v.z()) << '\n';
    }
    for (const Vec2& t : mesh.uvs) {
        os << "vt " << fmt_double(t.x()) << ' ' << fmt_double(t.y()) << '\n';
    }
    for (const Vec3& n : mesh.normals) {
        os << "vn " << fmt_double(n.x()) << ' ' << fmt_double(n.y()) << ' ' << fmt_double(n.z()) << '\n';
    }
    const bool has_uv = !mesh.uvs.empty();
    const bool has_n = !mesh.normals.empty();
    int current_label = 0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        if (!mesh.face_labels.empty() && mesh.face_labels[f] != current_label) {
            current_label = mesh.face_labels[f];
            os << "usemtl region" << current_label << '\n';
        }
        os << 'f';
        for (int c = 0; c < 3; ++c) {
            const int i = mesh.faces[f][c] + 1;
            os << ' ' << i;
            if (has_uv || has_n) {
                os << '/';
                if (has_uv) {
                    os << i;
                }
                if (has_n) {
                    os << '/' << i;
                }
            }
        }
        os << '\n';
    }
    auto out = open_out(path, true);
    const std::string s = os.str();
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

TriangleMesh read_obj(const fs::path& path)
{
    auto is = open_in(path, false);
    TriangleMesh mesh;
    std::vector<Vec2> uvs;
    std::vector<Vec3> normals;
    std::string line;
    int label = 0;
    bool any_label = false;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            ls >> v.x() >> v.y() >> v.z();
            mesh.vertices.push_back(v);
        } else if (tag == "vt") {
            Vec2 t;
            ls >> t.x() >> t.y();
            uvs.push_back(t);
        } else if (tag == "vn") {
            Vec3 n;
            ls >> n.x() >> n.y() >> n.z();
            normals.push_back(n);
        } else if (tag == "usemtl") {
            std::string name;
            ls >> name;
            label = name.rfind("region", 0) == 0 ? std::stoi(name.substr(6)) : 0;
            any_label = true;
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                const int i = std::stoi(tok.substr(0, tok.find('/')));
                idx.push_back(i > 0 ? i - 1 : static_cast<int>(mesh.vertices.size()) + i);
            }
            for (std::size_t k = 2; k < idx.size(); ++k) {
                mesh.faces.push_back({idx[0], idx[k - 1], idx[k]});
                mesh.face_labels.push_back(label);
            }
        }
    }
    if (!any_label) {
        mesh.face_labels.clear();
    }
    if (uvs.size() == mesh.vertices.size()) {
        mesh.uvs = std::move(uvs);
    }
    if (normals.size() == mesh.vertices.size()) {
        mesh.normals = std::move(normals);
    }
    mesh.validate();
    return mesh;
}

// ---------------------------------------------------------------- PLY

void write_ply(const fs::path& path, const TriangleMesh& mesh)
{
    const bool has_n = !mesh.normals.empty();
    std::ostringstream hdr;
    hdr << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (has_n) {
        hdr << "property float nx\nproperty float ny\nproperty float nz\n";
    }
    hdr << "element face " << mesh.faces.size() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    auto os = open_out(path, true);
    const std::string h = hdr.str();
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        float buf[6];
        for (int c = 0; c < 3; ++c) {
            buf[c] = static_cast<float>(mesh.vertices[i][c]);
        }
        int n = 3;
        if (has_n) {
            for (int c = 0; c < 3; ++c) {
                buf[3 + c] = static_cast<float>(mesh.normals[i][c]);
            }
            n = 6;
        }
        os.write(reinterpret_cast<const char*>(buf), static_cast<std::streamsize>(n * sizeof(float)));
    }
    for (const Face& f : mesh.faces) {
        const unsigned char three = 3;
        os.write(reinterpret_cast<const char*>(&three), 1);
        os.write(reinterpret_cast<const char*>(f.data()), 3 * sizeof(int));
    }
}

TriangleMesh read_ply(const fs::path& path)
{
    auto is = open_in(path, true);
    std::string line;
    std::size_t nv = 0;
    std::size_t nf = 0;
    int vprops = 0;
    bool in_vertex = false;
    std::getline(is, line);
    require(line == "ply", ErrorCode::Io, "not a PLY file: " + path.string());
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            require(fmt == "binary_little_endian", ErrorCode::Io, "only binary little-endian PLY is supported");
        } else if (tag == "element") {
            std::string what;
            ls >> what;
            in_vertex = what == "vertex";
            (in_vertex ? nv : nf) = 0;
            ls >> (in_vertex ? nv : nf);
        } else if (tag == "property" && in_vertex) {
            std::string type;
            ls >> type;
            require(type == "float", ErrorCode::Io, "unsupported PLY vertex property type");
            ++vprops;
        } else if (tag == "end_header") {
            break;
        }
    }
    TriangleMesh mesh;
    mesh.vertices.resize(nv);
    if (vprops >= 6) {
        mesh.normals.resize(nv);
    }
    std::vector<float> buf(vprops);
    for (std::size_t i = 0; i < nv; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(vprops * sizeof(float)));
        mesh.vertices[i] = Vec3(buf[0], buf[1], buf[2]);
        if (vprops >= 6) {
            mesh.normals[i] = Vec3(buf[3], buf[4], buf[5]);
        }
    }
    mesh.faces.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        unsigned char n = 0;
        is.read(reinterpret_cast<char*>(&n), 1);
        require(n == 3, ErrorCode::Io, "only triangle faces are supported");
        is.read(reinterpret_cast<char*>(mesh.faces[f].data()), 3 * sizeof(int));
    }
    require(static_cast<bool>(is), ErrorCode::Io, "truncated PLY: " + path.string());
    // float32 storage; renormalize so the unit-normal invariant holds exactly
    for (Vec3& n : mesh.normals) {
        if (n.norm() > 0) {
            n.normalize();
        }
    }
    mesh.validate();
    return mesh;
}

void write_mesh(const fs::path& path, const TriangleMesh& mesh)
{
    if (path.extension() == ".ply") {
        write_ply(path, mesh);
    } else {
        write_obj(path, mesh);
    }
}

TriangleMesh read_mesh(const fs::path& path)
{
    return path.extension() == ".ply" ? read_ply(path) : read_obj(path);
}

// ---------------------------------------------------------------- SDF

void write_sdf(const fs::path& path, const ScalarField3& field, SdfPrecision precision)
{
    field.validate();
    const fs::path raw = path.string() + ".raw";
    const bool wide = precision == SdfPrecision::Float64;
    json hdr;
    hdr["dims"] = field.dims;
    hdr["box"] = {{"min", to_json(field.box.min)}, {"max", to_json(field.box.max)}};
    hdr["sign_convention"] = "negative-inside";
    hdr["layout"] = "x-fastest";
    hdr["dtype"] = wide ? "float64-le" : "float32-le";
    hdr["payload"] = raw.filename().string();
    write_json(path, hdr);
    if (wide) {
        write_bytes(raw, field.values.data(), field.values.size() * sizeof(double));
        return;
    }
    std::vector<float> buf(field.values.begin(), field.values.end());
    write_bytes(raw, buf.data(), buf.size() * sizeof(float));
}

ScalarField3 read_sdf(const fs::path& path)
{
    const json hdr = read_json(path);
    require(hdr.value("sign_convention", "") == "negative-inside", ErrorCode::Io, "unexpected sign convention");
    const auto dims = hdr.at("dims").get<std::array<int, 3>>();
    Box3 box{vec3_from_json(hdr.at("box").at("min")), vec3_from_json(hdr.at("box").at("max"))};
    ScalarField3 field(dims, box);
    const fs::path raw = path.parent_path() / hdr.value("payload", path.filename().string() + ".raw");
    const auto bytes = read_bytes(raw);
    const std::string dtype = hdr.value("dtype", "float32-le");
    if (dtype == "float64-le") {
        require(bytes.size() == field.size() * sizeof(double), ErrorCode::Io, "sdf payload size mismatch");
        std::memcpy(field.values.data(), bytes.data(), bytes.size());
        return field;
    }
    require(dtype == "float32-le", ErrorCode::Io, "unsupported sdf dtype " + dtype);
    require(bytes.size() == field.size() * sizeof(float), ErrorCode::Io, "sdf payload size mismatch");
    std::vector<float> buf(field.size());
    std::memcpy(buf.data(), bytes.data(), bytes.size());
    field.values.assign(buf.begin(), buf.end());
    return field;
}

// ---------------------------------------------------------------- PFM

void write_pfm(const fs::path& path, const Image& img)
{
    require(img.channels == 1 || img.channels == 3, ErrorCode::InvalidArgument, "PFM supports 1 or 3 channels");
    img.validate();
    auto os = open_out(path, true);
    const std::string hdr = std::string(img.channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(img.width) + " " +
                            std::to_string(img.height) + "\n-1.0\n";
    os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = img.height - 1; y >= 0; --y) {
        os.write(reinterpret_cast<const char*>(img.data.data() + y * row),
                 static_cast<std::streamsize>(row * sizeof(float)));
    }
}

Image read_pfm(const fs::path& path)
{
    auto is = open_in(path, true);
    std::string magic;
    int w = 0;
    int h = 0;
    double scale = 0;
    is >> magic >> w >> h >> scale;
    is.get();
    require(magic == "PF" || magic == "Pf", ErrorCode::Io, "not a PFM file");
    require(scale < 0, ErrorCode::Io, "big-endian PFM not supported");
    Image img(w, h, magic == "PF" ? 3 : 1);
    const std::size_t row = static_cast<std::size_t>(w) * img.channels;
    for (int y = h - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char*>(img.data.data() + y * row), static_cast<std::streamsize>(row * sizeof(float)));
    }
    require(static_cast<bool>(is), ErrorCode::Io, "truncated PFM");
    return img;
}

// ---------------------------------------------------------------- PNG

void write_png(const fs::path& path, const Image& img, bool raw_labels)
{
    require(img.channels == 1 || img.channels == 3, ErrorCode::InvalidArgument, "PNG supports 1 or 3 channels");
    img.validate();
    std::vector<unsigned char> buf(img.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const double v = raw_labels ? img.data[i] : img.data[i] * 255.0;
        buf[i] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
    }
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    png_image pi;
    std::memset(&pi, 0, sizeof(pi));
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int ok = png_image_write_to_file(&pi, path.c_str(), 0, buf.data(), 0, nullptr);
    require(ok != 0, ErrorCode::Io, "png write failed: " + path.string());
}

Image read_png(const fs::path& path, bool raw_labels)
{
    png_image pi;
    std::memset(&pi, 0, sizeof(pi));
    pi.version = PNG_IMAGE_VERSION;
    require(png_image_begin_read_from_file(&pi, path.c_str()) != 0, ErrorCode::Io,
            "png read failed: " + path.string());
    const bool color = (pi.format & PNG_FORMAT_FLAG_COLOR) != 0;
    pi.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int c = color ? 3 : 1;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pi));
    require(png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr) != 0, ErrorCode::Io,
            "png decode failed: " + path.string());
    Image img(static_cast<int>(pi.width), static_cast<int>(pi.height), c);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = raw_labels ? static_cast<float>(buf[i]) : static_cast<float>(buf[i] / 255.0);
    }
    return img;
}

// ---------------------------------------------------------------- JSON

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json to_json(const RigidPose& pose)
{
    json r = json::array();
    for (int i = 0; i < 3; ++i) {
        r.push_back({pose.rotation(i, 0), pose.rotation(i, 1), pose.rotation(i, 2)});
    }
    return {{"rotation", r}, {"translation", to_json(pose.translation)}, {"scale", pose.scale}};
}

RigidPose pose_from_json(const json& j)
{
    RigidPose p;
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
            p.rotation(i, k) = j.at("rotation").at(i).at(k).get<double>();
        }
    }
    p.translation = vec3_from_json(j.at("translation"));
    p.scale = j.value("scale", 1.0);
    return p;
}

json to_json(const Camera& camera)
{
    if (const auto* p = std::get_if<PerspectiveCamera>(&camera)) {
        return {{"kind", "perspective"},
                {"focal", p->focal},
                {"principal", {p->principal.x(), p->principal.y()}},
                {"pose", to_json(p->pose)},
                {"width", p->width},
                {"height", p->height}};
    }
    const auto& c = std::get<CropAlignedCamera>(camera);
    return {{"kind", "crop_aligned"},
            {"box", {{"min", to_json(c.box.min)}, {"max", to_json(c.box.max)}}},
            {"width", c.width},
            {"height", c.height}};
}

Camera camera_from_json(const json& j)
{
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "perspective") {
        PerspectiveCamera p;
        p.focal = j.at("focal").get<double>();
        p.principal = Vec2(j.at("principal").at(0).get<double>(), j.at("principal").at(1).get<double>());
        p.pose = pose_from_json(j.at("pose"));
        p.width = j.value("width", 0);
        p.height = j.value("height", 0);
        return p;
    }
    require(kind == "crop_aligned", ErrorCode::Io, "unknown camera kind: " + kind);
    CropAlignedCamera c;
    c.box = Box3{vec3_from_json(j.at("box").at("min")), vec3_from_json(j.at("box").at("max"))};
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    return c;
}

void write_json(const fs::path& path, const json& j)
{
    auto os = open_out(path, true);
    const std::string s = j.dump(2) + "\n";
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

json read_json(const fs::path& path)
{
    auto is = open_in(path, false);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, "bad JSON in " + path.string() + ": " + e.what());
    }
}

std::vector<unsigned char> read_bytes(const fs::path& path)
{
    auto is = open_in(path, true);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const void* data, std::size_t size)
{
    auto os = open_out(path, true);
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

} // namespace hsdf::io
