#include "hsdf/composite/poisson.hpp"

#include "hsdf/geom/error.hpp"

#include <cmath>
#include <vector>

namespace hsdf::composite {

namespace {

// Unknown pixels of a masked region and their 4-neighbour structure.
struct Region {
    int width = 0;
    int height = 0;
    std::vector<int> pixels;  // linear pixel index per unknown
    std::vector<int> slot;    // unknown index per pixel, -1 outside
};

Region make_region(const Image& mask)
{
    Region r;
    r.width = mask.width;
    r.height = mask.height;
    r.slot.assign(mask.pixel_count(), -1);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y, 0) > 0.5f) {
                require(x > 0 && y > 0 && x < mask.width - 1 && y < mask.height - 1, ErrorCode::OutOfDomain,
                        "mask region touches the image border");
                const int p = y * mask.width + x;
                r.slot[p] = static_cast<int>(r.pixels.size());
                r.pixels.push_back(p);
            }
        }
    }
    return r;
}

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// A f = 4 f_p - sum of in-region neighbours (SPD, strictly diagonally dominant
// at the boundary).
void apply_laplacian(const Region& r, const std::vector<double>& f, std::vector<double>& out)
{
    for (std::size_t i = 0; i < r.pixels.size(); ++i) {
        const int p = r.pixels[i];
        const int x = p % r.width;
        const int y = p / r.width;
        double acc = 4.0 * f[i];
        for (int k = 0; k < 4; ++k) {
            const int q = r.slot[(y + kDy[k]) * r.width + (x + kDx[k])];
            if (q >= 0) {
                acc -= f[q];
            }
        }
        out[i] = acc;
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// Returns the final residual norm.
double conjugate_gradient(const Region& r, const std::vector<double>& b, std::vector<double>& x,
                          const SolverOptions& opts, int& iterations)
{
    const std::size_t n = b.size();
    std::vector<double> ax(n), res(n), dir(n), ad(n);
    apply_laplacian(r, x, ax);
    for (std::size_t i = 0; i < n; ++i) {
        res[i] = b[i] - ax[i];
    }
    dir = res;
    double rr = dot(res, res);
    const int max_it = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * n + 10);
    const double tol2 = opts.tolerance * opts.tolerance;
    int it = 0;
    while (rr > tol2 && it < max_it) {
        apply_laplacian(r, dir, ad);
        const double alpha = rr / dot(dir, ad);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * dir[i];
            res[i] -= alpha * ad[i];
        }
        const double rr_new = dot(res, res);
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < n; ++i) {
            dir[i] = res[i] + beta * dir[i];
        }
        rr = rr_new;
        ++it;
        // recompute the true residual now and then to stop drift
        if (it % 200 == 0) {
            apply_laplacian(r, x, ax);
            for (std::size_t i = 0; i < n; ++i) {
                res[i] = b[i] - ax[i];
            }
            rr = dot(res, res);
        }
    }
    apply_laplacian(r, x, ax);
    double true_rr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        true_rr += (b[i] - ax[i]) * (b[i] - ax[i]);
    }
    iterations += it;
    return std::sqrt(true_rr);
}

Region make_region(int width, int height, const std::vector<unsigned char>& mask)
{
    Image m(width, height, 1);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        m.data[i] = mask[i] ? 1.0f : 0.0f;
    }
    return make_region(m);
}

std::vector<unsigned char> mask_bits(const Image& mask)
{
    std::vector<unsigned char> bits(mask.pixel_count());
    for (std::size_t p = 0; p < bits.size(); ++p) {
        bits[p] = mask.data[p * mask.channels] > 0.5f ? 1 : 0;
    }
    return bits;
}

Image solve_image(const Image* source, const Image& target, const Image& mask, const SolverOptions& opts,
                  SolveStats* stats)
{
    require(target.width == mask.width && target.height == mask.height, ErrorCode::SizeMismatch,
            "mask size differs from image size");
    if (source != nullptr) {
        require(source->same_shape(target), ErrorCode::SizeMismatch, "source and target differ in shape");
    }
    const auto bits = mask_bits(mask);
    Image out = target;
    SolveStats total;
    for (int c = 0; c < target.channels; ++c) {
        Plane t{target.width, target.height, std::vector<double>(target.pixel_count())};
        Plane s{target.width, target.height, std::vector<double>(target.pixel_count())};
        for (std::size_t p = 0; p < t.values.size(); ++p) {
            t.values[p] = target.data[p * target.channels + c];
            if (source != nullptr) {
                s.values[p] = source->data[p * target.channels + c];
            }
        }
        SolveStats st;
        const Plane f = solve_masked_poisson(source != nullptr ? &s : nullptr, t, bits, opts, &st);
        total.max_residual = std::max(total.max_residual, st.max_residual);
        total.iterations += st.iterations;
        for (std::size_t p = 0; p < f.values.size(); ++p) {
            out.data[p * target.channels + c] = static_cast<float>(f.values[p]);
        }
    }
    if (stats != nullptr) {
        *stats = total;
    }
    return out;
}

} // namespace

Plane solve_masked_poisson(const Plane* source, const Plane& target, const std::vector<unsigned char>& mask,
                           const SolverOptions& opts, SolveStats* stats)
{
    require(mask.size() == target.values.size(), ErrorCode::SizeMismatch, "mask size differs from plane size");
    require(source == nullptr || source->values.size() == target.values.size(), ErrorCode::SizeMismatch,
            "source and target differ in shape");
    const Region r = make_region(target.width, target.height, mask);
    Plane out = target;
    SolveStats local;
    const std::size_t n = r.pixels.size();
    if (n > 0) {
        std::vector<double> b(n, 0.0), x(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int p = r.pixels[i];
            const int px = p % r.width;
            const int py = p / r.width;
            x[i] = target.values[p];
            double rhs = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int q = (py + kDy[k]) * r.width + (px + kDx[k]);
                if (r.slot[q] < 0) {
                    rhs += target.values[q];
                }
                if (source != nullptr) {
                    rhs += source->values[p] - source->values[q];
                }
            }
            b[i] = rhs;
        }
        local.max_residual = conjugate_gradient(r, b, x, opts, local.iterations);
        for (std::size_t i = 0; i < n; ++i) {
            out.values[r.pixels[i]] = x[i];
        }
    }
    if (stats != nullptr) {
        *stats = local;
    }
    return out;
}

Image poisson_blend(const Image& source, const Image& target, const Image& mask, const SolverOptions& opts,
                    SolveStats* stats)
{
    return solve_image(&source, target, mask, opts, stats);
}

Image laplacian_inpaint(const Image& img, const Image& hole_mask, const SolverOptions& opts, SolveStats* stats)
{
    return solve_image(nullptr, img, hole_mask, opts, stats);
}

} // namespace hsdf::composite
