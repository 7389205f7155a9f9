#pragma once

#include "hsdf/geom/types.hpp"

#include <vector>

namespace hsdf::bench {

struct Nearest {
    int index = -1;
    double distance = 0.0;
};

/// Static 3-d tree over a point set. Exact queries; equidistant candidates
/// resolve to the lowest index, the same answer a linear scan gives.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);
    Nearest nearest(const Vec3& q) const;
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int begin, end;    // range in order_
        int axis = -1;     // -1 = leaf
        double split = 0.0;
        int left = -1, right = -1;
    };
    int build(int begin, int end);
    void search(int node, const Vec3& q, double& best_d2, int& best) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Nearest reference point for every query. Throws on an empty reference set.
std::vector<Nearest> nearest_neighbor(const std::vector<Vec3>& points, const std::vector<Vec3>& queries);

} // namespace hsdf::bench
