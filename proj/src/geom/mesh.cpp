#include "hsdf/geom/mesh.hpp"

#include "hsdf/geom/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <string>

namespace hsdf {

void TriangleMesh::validate() const
{
    const int n = static_cast<int>(vertices.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& t = faces[f];
        for (int c = 0; c < 3; ++c) {
            require(t[c] >= 0 && t[c] < n, ErrorCode::InvalidArgument,
                    "face " + std::to_string(f) + " references vertex out of range");
        }
        require(t[0] != t[1] && t[1] != t[2] && t[0] != t[2], ErrorCode::InvalidArgument,
                "face " + std::to_string(f) + " repeats a vertex");
    }
    require(uvs.empty() || uvs.size() == vertices.size(), ErrorCode::InvalidArgument, "uv count != vertex count");
    require(normals.empty() || normals.size() == vertices.size(), ErrorCode::InvalidArgument,
            "normal count != vertex count");
    require(face_labels.empty() || face_labels.size() == faces.size(), ErrorCode::InvalidArgument,
            "label count != face count");
    for (const Vec3& nrm : normals) {
        const double len = nrm.norm();
        require(len == 0.0 || std::abs(len - 1.0) <= 1e-6, ErrorCode::InvalidArgument, "stored normal not unit");
    }
}

Vec3 face_cross(const TriangleMesh& mesh, int face)
{
    const Face& t = mesh.faces[face];
    const Vec3& a = mesh.vertices[t[0]];
    return (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
}

std::vector<Vec3> mesh_vertex_normals(const TriangleMesh& mesh)
{
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
        const Vec3 c = face_cross(mesh, f);
        // |c| = 2 * area, so the cross product itself is the area weight
        if (0.5 * c.norm() <= 1e-12) {
            continue;
        }
        for (int v : mesh.faces[f]) {
            acc[v] += c;
        }
    }
    for (Vec3& n : acc) {
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    }
    return acc;
}

double mesh_area(const TriangleMesh& mesh)
{
    double a = 0.0;
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
        a += 0.5 * face_cross(mesh, f).norm();
    }
    return a;
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidPose& pose)
{
    TriangleMesh out = mesh;
    for (Vec3& v : out.vertices) {
        v = pose.apply(v);
    }
    for (Vec3& n : out.normals) {
        n = pose.rotation * n;
    }
    return out;
}

namespace {

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* p, std::size_t n)
    {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    }
    template <class T>
    void pod(const T& v) { bytes(&v, sizeof(T)); }
};

} // namespace

std::uint64_t mesh_hash(const TriangleMesh& mesh)
{
    Fnv f;
    f.pod(mesh.vertices.size());
    for (const Vec3& v : mesh.vertices) {
        f.pod(v.x()); f.pod(v.y()); f.pod(v.z());
    }
    f.pod(mesh.faces.size());
    for (const Face& t : mesh.faces) {
        f.pod(t);
    }
    for (const Vec2& uv : mesh.uvs) {
        f.pod(uv.x()); f.pod(uv.y());
    }
    for (const Vec3& n : mesh.normals) {
        f.pod(n.x()); f.pod(n.y()); f.pod(n.z());
    }
    for (int l : mesh.face_labels) {
        f.pod(l);
    }
    return f.h;
}

std::vector<int> face_components(const TriangleMesh& mesh, int* count)
{
    std::vector<int> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const Face& t : mesh.faces) {
        for (int c = 1; c < 3; ++c) {
            const int a = find(t[0]);
            const int b = find(t[c]);
            if (a != b) {
                parent[std::max(a, b)] = std::min(a, b);
            }
        }
    }
    std::map<int, int> ids;
    std::vector<int> comp(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const int root = find(mesh.faces[f][0]);
        auto it = ids.emplace(root, static_cast<int>(ids.size())).first;
        comp[f] = it->second;
    }
    if (count != nullptr) {
        *count = static_cast<int>(ids.size());
    }
    return comp;
}

double median_edge_length(const TriangleMesh& mesh)
{
    std::vector<double> len;
    len.reserve(mesh.faces.size() * 3);
    for (const Face& t : mesh.faces) {
        for (int c = 0; c < 3; ++c) {
            len.push_back((mesh.vertices[t[c]] - mesh.vertices[t[(c + 1) % 3]]).norm());
        }
    }
    if (len.empty()) {
        return 0.0;
    }
    const auto mid = len.begin() + static_cast<std::ptrdiff_t>(len.size() / 2);
    std::nth_element(len.begin(), mid, len.end());
    return *mid;
}

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    std::vector<Face> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (Vec3& p : v) {
        p.normalize();
    }
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) {
                return it->second;
            }
            v.push_back((v[a] + v[b]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const Face& tri : f) {
            const int a = midpoint(tri[0], tri[1]);
            const int b = midpoint(tri[1], tri[2]);
            const int c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    TriangleMesh mesh;
    mesh.faces = std::move(f);
    mesh.vertices.reserve(v.size());
    for (const Vec3& p : v) {
        mesh.vertices.push_back(center + radius * p);
    }
    return mesh;
}

TriangleMesh make_cube(double h, const Vec3& c)
{
    TriangleMesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.push_back(c + h * Vec3((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1));
    }
    // two CCW (outward) triangles per face
    m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
               {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return m;
}

} // namespace hsdf
