#include "hsdf/bench/kdtree.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hsdf::bench {

namespace {
constexpr int kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points))
{
    require(!points_.empty(), ErrorCode::InvalidArgument, "nearest-neighbour reference set is empty");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int begin, int end)
{
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) {
        return id;
    }
    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] <= lo[axis]) {
        return id;  // all points coincide
    }
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
    });
    const double split = points_[order_[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

void KdTree::search(int node, const Vec3& q, double& best_d2, int& best) const
{
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const int idx = order_[i];
            const double d2 = (q - points_[idx]).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                best_d2 = d2;
                best = idx;
            }
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    search(near, q, best_d2, best);
    // <= keeps equidistant points on the far side reachable for the index tie-break
    if (diff * diff <= best_d2) {
        search(far, q, best_d2, best);
    }
}

Nearest KdTree::nearest(const Vec3& q) const
{
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = -1;
    search(0, q, best_d2, best);
    return {best, std::sqrt(best_d2)};
}

std::vector<Nearest> nearest_neighbor(const std::vector<Vec3>& points, const std::vector<Vec3>& queries)
{
    const KdTree tree(points);
    std::vector<Nearest> out(queries.size());
    parallel_for(queries.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            out[i] = tree.nearest(queries[i]);
        }
    });
    return out;
}

} // namespace hsdf::bench
