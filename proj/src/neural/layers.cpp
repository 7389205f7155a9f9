#include "hsdf/neural/layers.hpp"

#include "hsdf/geom/error.hpp"

#include <algorithm>
#include <cmath>

namespace hsdf::neural {

void leaky_relu_inplace(double* x, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] < 0.0) {
            x[i] *= kLeakySlope;
        }
    }
}

void leaky_relu_backward(const double* pre, double* grad, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        if (pre[i] < 0.0) {
            grad[i] *= kLeakySlope;
        }
    }
}

namespace {

void uniform_fill(double* p, std::size_t n, double bound, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = dist(rng);
    }
}

} // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride_)
    : in(in_ch), out(out_ch), k(kernel), stride(stride_), weight(RowMatrix::Zero(out_ch, in_ch * kernel * kernel)),
      bias(Eigen::VectorXd::Zero(out_ch)), grad_weight(RowMatrix::Zero(out_ch, in_ch * kernel * kernel)),
      grad_bias(Eigen::VectorXd::Zero(out_ch))
{
    require(in_ch > 0 && out_ch > 0 && kernel % 2 == 1 && stride_ >= 1, ErrorCode::InvalidArgument,
            "bad conv shape");
}

Tensor Conv2d::forward(const Tensor& x, RowMatrix& cols) const
{
    require(x.c == in, ErrorCode::SizeMismatch, "conv input channel mismatch");
    const int ho = out_size(x.h);
    const int wo = out_size(x.w);
    const int pad = k / 2;
    const int p = ho * wo;
    cols.setZero(in * k * k, p);
    for (int ch = 0; ch < in; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols.row((ch * k + ky) * k + kx).data();
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= x.h) {
                        continue;
                    }
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < x.w) {
                            row[oy * wo + ox] = x.at(ch, iy, ix);
                        }
                    }
                }
            }
        }
    }
    // Eigen picks its reduction order from the runtime alignment of the
    // operands, so the arithmetic stays on Eigen-owned (aligned) storage and a
    // result never depends on where the tensor happened to be allocated.
    RowMatrix ym = weight * cols;
    ym.colwise() += bias;
    Tensor y(out, ho, wo);
    std::copy(ym.data(), ym.data() + ym.size(), y.data.begin());
    return y;
}

Tensor Conv2d::backward(const Tensor& x_shape, const RowMatrix& cols, const Tensor& grad_out, bool want_input)
{
    const int p = grad_out.h * grad_out.w;
    const RowMatrix g = Eigen::Map<const RowMatrix>(grad_out.data.data(), out, p);
    grad_weight.noalias() += g * cols.transpose();
    grad_bias += g.rowwise().sum();
    Tensor gx;
    if (!want_input) {
        return gx;
    }
    const RowMatrix gcols = weight.transpose() * g;
    gx = Tensor(in, x_shape.h, x_shape.w);
    const int pad = k / 2;
    const int ho = grad_out.h;
    const int wo = grad_out.w;
    for (int ch = 0; ch < in; ++ch) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = gcols.row((ch * k + ky) * k + kx).data();
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= gx.h) {
                        continue;
                    }
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < gx.w) {
                            gx.at(ch, iy, ix) += row[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void Conv2d::init(std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
    uniform_fill(weight.data(), weight.size(), bound, rng);
    uniform_fill(bias.data(), bias.size(), bound, rng);
}

void Conv2d::zero_grad()
{
    grad_weight.setZero();
    grad_bias.setZero();
}

void Conv2d::params(const std::string& prefix, std::vector<ParamRef>& out_refs)
{
    out_refs.push_back({prefix + ".weight", weight.data(), grad_weight.data(), static_cast<std::size_t>(weight.size())});
    out_refs.push_back({prefix + ".bias", bias.data(), grad_bias.data(), static_cast<std::size_t>(bias.size())});
}

Dense::Dense(int in_dim, int out_dim)
    : in(in_dim), out(out_dim), weight(RowMatrix::Zero(out_dim, in_dim)), bias(Eigen::VectorXd::Zero(out_dim)),
      grad_weight(RowMatrix::Zero(out_dim, in_dim)), grad_bias(Eigen::VectorXd::Zero(out_dim))
{
    require(in_dim > 0 && out_dim > 0, ErrorCode::InvalidArgument, "bad dense shape");
}

RowMatrix Dense::forward(const RowMatrix& x) const
{
    require(x.cols() == in, ErrorCode::SizeMismatch, "dense input width mismatch");
    RowMatrix y = x * weight.transpose();
    y.rowwise() += bias.transpose();
    return y;
}

RowMatrix Dense::backward(const RowMatrix& x, const RowMatrix& grad_out, bool want_input)
{
    grad_weight.noalias() += grad_out.transpose() * x;
    grad_bias += grad_out.colwise().sum().transpose();
    if (!want_input) {
        return {};
    }
    return grad_out * weight;
}

void Dense::init(std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    uniform_fill(weight.data(), weight.size(), bound, rng);
    uniform_fill(bias.data(), bias.size(), bound, rng);
}

void Dense::zero_grad()
{
    grad_weight.setZero();
    grad_bias.setZero();
}

void Dense::params(const std::string& prefix, std::vector<ParamRef>& out_refs)
{
    out_refs.push_back({prefix + ".weight", weight.data(), grad_weight.data(), static_cast<std::size_t>(weight.size())});
    out_refs.push_back({prefix + ".bias", bias.data(), grad_bias.data(), static_cast<std::size_t>(bias.size())});
}

Tensor avg_pool2(const Tensor& x)
{
    require(x.h % 2 == 0 && x.w % 2 == 0, ErrorCode::SizeMismatch, "pooling needs even sizes");
    Tensor y(x.c, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                y.at(c, yy, xx) = 0.25 * (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) +
                                          x.at(c, 2 * yy + 1, 2 * xx) + x.at(c, 2 * yy + 1, 2 * xx + 1));
            }
        }
    }
    return y;
}

Tensor avg_pool2_backward(const Tensor& g, int h, int w)
{
    Tensor gx(g.c, h, w);
    for (int c = 0; c < g.c; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                gx.at(c, y, x) = 0.25 * g.at(c, y / 2, x / 2);
            }
        }
    }
    return gx;
}

Tensor upsample2(const Tensor& x)
{
    Tensor y(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
            }
        }
    }
    return y;
}

Tensor upsample2_backward(const Tensor& g)
{
    Tensor gx(g.c, g.h / 2, g.w / 2);
    for (int c = 0; c < g.c; ++c) {
        for (int y = 0; y < g.h; ++y) {
            for (int x = 0; x < g.w; ++x) {
                gx.at(c, y / 2, x / 2) += g.at(c, y, x);
            }
        }
    }
    return gx;
}

BilinearTap bilinear_tap(const Tensor& t, double u, double v)
{
    const double x = std::clamp(u, 0.0, static_cast<double>(t.w - 1));
    const double y = std::clamp(v, 0.0, static_cast<double>(t.h - 1));
    BilinearTap tap{};
    tap.x0 = std::min(static_cast<int>(x), t.w - 1);
    tap.y0 = std::min(static_cast<int>(y), t.h - 1);
    tap.x1 = std::min(tap.x0 + 1, t.w - 1);
    tap.y1 = std::min(tap.y0 + 1, t.h - 1);
    const double fx = x - tap.x0;
    const double fy = y - tap.y0;
    tap.w00 = (1 - fx) * (1 - fy);
    tap.w10 = fx * (1 - fy);
    tap.w01 = (1 - fx) * fy;
    tap.w11 = fx * fy;
    return tap;
}

void bilinear_gather(const Tensor& t, const BilinearTap& tap, double* out)
{
    for (int c = 0; c < t.c; ++c) {
        out[c] = tap.w00 * t.at(c, tap.y0, tap.x0) + tap.w10 * t.at(c, tap.y0, tap.x1) +
                 tap.w01 * t.at(c, tap.y1, tap.x0) + tap.w11 * t.at(c, tap.y1, tap.x1);
    }
}

void bilinear_scatter(Tensor& grad, const BilinearTap& tap, const double* g)
{
    for (int c = 0; c < grad.c; ++c) {
        grad.at(c, tap.y0, tap.x0) += tap.w00 * g[c];
        grad.at(c, tap.y0, tap.x1) += tap.w10 * g[c];
        grad.at(c, tap.y1, tap.x0) += tap.w01 * g[c];
        grad.at(c, tap.y1, tap.x1) += tap.w11 * g[c];
    }
}

} // namespace hsdf::neural
