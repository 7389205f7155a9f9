#include "hsdf/reconstruct/marching_cubes.hpp"

#include "hsdf/geom/error.hpp"
#include "mc_tables.hpp"

#include <cmath>
#include <vector>

namespace hsdf::reconstruct {

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

} // namespace

TriangleMesh marching_cubes(const ScalarField3& field, double iso)
{
    field.validate();
    for (double v : field.values) {
        require(std::isfinite(v), ErrorCode::NonFinite, "marching cubes needs a finite field");
    }
    const int nx = field.dims[0];
    const int ny = field.dims[1];
    const int nz = field.dims[2];
    TriangleMesh mesh;
    // vertex id per lattice edge leaving node (i,j,k) along each axis
    std::vector<int> edge_vertex[3];
    for (auto& e : edge_vertex) {
        e.assign(field.size(), -1);
    }
    auto inside = [&](int i, int j, int k) { return field.at(i, j, k) < iso; };
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const int nb[3][3] = {{i + 1, j, k}, {i, j + 1, k}, {i, j, k + 1}};
                for (int axis = 0; axis < 3; ++axis) {
                    const int* q = nb[axis];
                    if (q[0] >= nx || q[1] >= ny || q[2] >= nz || inside(i, j, k) == inside(q[0], q[1], q[2])) {
                        continue;
                    }
                    const double a = field.at(i, j, k);
                    const double b = field.at(q[0], q[1], q[2]);
                    const double t = (iso - a) / (b - a);
                    const Vec3 pa = field.node_position(i, j, k);
                    const Vec3 pb = field.node_position(q[0], q[1], q[2]);
                    edge_vertex[axis][field.index(i, j, k)] = static_cast<int>(mesh.vertices.size());
                    mesh.vertices.push_back(pa + t * (pb - pa));
                }
            }
        }
    }
    if (mesh.vertices.empty()) {
        return mesh;
    }
    auto edge_id = [&](int i, int j, int k, int e) {
        const int* ca = kCorner[kEdge[e][0]];
        const int* cb = kCorner[kEdge[e][1]];
        int o[3];
        int axis = 0;
        for (int a = 0; a < 3; ++a) {
            o[a] = std::min(ca[a], cb[a]);
            if (ca[a] != cb[a]) {
                axis = a;
            }
        }
        return edge_vertex[axis][field.index(i + o[0], j + o[1], k + o[2])];
    };
    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                int config = 0;
                for (int c = 0; c < 8; ++c) {
                    if (inside(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])) {
                        config |= 1 << c;
                    }
                }
                const signed char* tri = detail::kTriTable[config];
                for (int t = 0; tri[t] >= 0; t += 3) {
                    // the table winds toward the inside; swap to face the positive side
                    mesh.faces.push_back(
                        {edge_id(i, j, k, tri[t]), edge_id(i, j, k, tri[t + 2]), edge_id(i, j, k, tri[t + 1])});
                }
            }
        }
    }
    return mesh;
}

} // namespace hsdf::reconstruct
