#include "hsdf/composite/contour.hpp"

#include "hsdf/geom/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsdf::composite {

std::vector<unsigned char> binarize(const Image& mask)
{
    std::vector<unsigned char> b(mask.pixel_count());
    for (std::size_t p = 0; p < b.size(); ++p) {
        b[p] = mask.data[p * mask.channels] > 0.5f ? 1 : 0;
    }
    return b;
}

namespace {

std::vector<unsigned char> largest_component(const std::vector<unsigned char>& bits, int w, int h)
{
    std::vector<int> label(bits.size(), -1);
    std::vector<int> sizes;
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        if (!bits[start] || label[start] >= 0) {
            continue;
        }
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        stack.push_back(start);
        label[start] = id;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            ++sizes[id];
            const int x = p % w;
            const int y = p / w;
            const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
            for (const auto& q : nb) {
                if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) {
                    continue;
                }
                const int qi = q[1] * w + q[0];
                if (bits[qi] && label[qi] < 0) {
                    label[qi] = id;
                    stack.push_back(qi);
                }
            }
        }
    }
    std::vector<unsigned char> out(bits.size(), 0);
    if (sizes.empty()) {
        return out;
    }
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = label[p] == best ? 1 : 0;
    }
    return out;
}

} // namespace

std::vector<Vec2> trace_outer_contour(const Image& mask)
{
    const int w = mask.width;
    const int h = mask.height;
    const auto bits = largest_component(binarize(mask), w, h);
    auto on = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && bits[y * w + x]; };
    int sx = -1;
    int sy = -1;
    for (int y = 0; y < h && sx < 0; ++y) {
        for (int x = 0; x < w; ++x) {
            if (on(x, y)) {
                sx = x;
                sy = y;
                break;
            }
        }
    }
    std::vector<Vec2> contour;
    if (sx < 0) {
        return contour;
    }
    // 8 neighbours in clockwise screen order starting west
    static const int dx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
    static const int dy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
    auto dir_of = [&](int ox, int oy) {
        for (int d = 0; d < 8; ++d) {
            if (dx[d] == ox && dy[d] == oy) {
                return d;
            }
        }
        return 0;
    };
    // one Moore step: returns the direction moved, or -1 for an isolated pixel
    auto step = [&](int& cx, int& cy, int& back) {
        for (int k = 1; k <= 8; ++k) {
            const int d = (back + k) % 8;
            const int nx = cx + dx[d];
            const int ny = cy + dy[d];
            if (on(nx, ny)) {
                const int pd = (d + 7) % 8;
                back = dir_of(cx + dx[pd] - nx, cy + dy[pd] - ny);
                cx = nx;
                cy = ny;
                return d;
            }
        }
        return -1;
    };
    int cx = sx;
    int cy = sy;
    int back = 0;  // scan order guarantees the west neighbour is background
    contour.emplace_back(cx, cy);
    const int first = step(cx, cy, back);
    if (first < 0) {
        return contour;
    }
    const std::size_t limit = 4 * static_cast<std::size_t>(w) * h + 8;
    while (contour.size() < limit) {
        if (cx == sx && cy == sy) {
            int tx = cx;
            int ty = cy;
            int tb = back;
            if (step(tx, ty, tb) == first) {
                break;
            }
        }
        contour.emplace_back(cx, cy);
        step(cx, cy, back);
    }
    return contour;
}

double contour_length(const std::vector<Vec2>& c)
{
    double len = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        len += (c[(i + 1) % c.size()] - c[i]).norm();
    }
    return len;
}

std::vector<Vec2> resample_contour(const std::vector<Vec2>& contour, int count, const Vec2& origin)
{
    require(!contour.empty() && count > 0, ErrorCode::InvalidArgument, "resample_contour needs points");
    const std::size_t n = contour.size();
    // start at the contour point best aligned with +x from origin
    std::size_t start = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = contour[i] - origin;
        const double score = std::abs(std::atan2(d.y(), d.x()));
        if (score < best - 1e-12) {
            best = score;
            start = i;
        }
    }
    std::vector<Vec2> loop(n);
    for (std::size_t i = 0; i < n; ++i) {
        loop[i] = contour[(start + i) % n];
    }
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        cum[i + 1] = cum[i] + (loop[(i + 1) % n] - loop[i]).norm();
    }
    const double total = cum[n];
    std::vector<Vec2> out;
    out.reserve(count);
    std::size_t seg = 0;
    for (int k = 0; k < count; ++k) {
        const double s = total * k / count;
        while (seg + 1 < n && cum[seg + 1] <= s) {
            ++seg;
        }
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
        out.push_back(loop[seg] + t * (loop[(seg + 1) % n] - loop[seg]));
    }
    return out;
}

Image erode(const Image& mask, int radius)
{
    const auto bits = binarize(mask);
    Image out(mask.width, mask.height, 1);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool keep = bits[y * mask.width + x] != 0;
            for (int oy = -radius; oy <= radius && keep; ++oy) {
                for (int ox = -radius; ox <= radius && keep; ++ox) {
                    const int qx = x + ox;
                    const int qy = y + oy;
                    if (std::abs(ox) + std::abs(oy) > radius) {
                        continue;
                    }
                    keep = qx >= 0 && qy >= 0 && qx < mask.width && qy < mask.height && bits[qy * mask.width + qx];
                }
            }
            out.at(x, y) = keep ? 1.0f : 0.0f;
        }
    }
    return out;
}

} // namespace hsdf::composite
