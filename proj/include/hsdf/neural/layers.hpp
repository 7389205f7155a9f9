#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hsdf::neural {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Channel-major feature tensor (c, h, w), double precision.
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int channels, int height, int width, double fill = 0.0)
        : c(channels), h(height), w(width), data(static_cast<std::size_t>(channels) * height * width, fill)
    {
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    double& at(int ch, int y, int x) { return data[ch * plane() + static_cast<std::size_t>(y) * w + x]; }
    double at(int ch, int y, int x) const { return data[ch * plane() + static_cast<std::size_t>(y) * w + x]; }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

/// A named parameter block and its gradient accumulator.
struct ParamRef {
    std::string name;
    double* value;
    double* grad;
    std::size_t size;
};

constexpr double kLeakySlope = 0.01;

void leaky_relu_inplace(double* x, std::size_t n);
/// grad *= slope where the pre-activation was negative.
void leaky_relu_backward(const double* pre, double* grad, std::size_t n);

struct Conv2d {
    int in = 0;
    int out = 0;
    int k = 3;
    int stride = 1;
    RowMatrix weight;  // out x (in*k*k)
    Eigen::VectorXd bias;
    RowMatrix grad_weight;
    Eigen::VectorXd grad_bias;

    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int kernel, int stride_);

    int out_size(int n) const { return (n + 2 * (k / 2) - k) / stride + 1; }
    /// Forward pass; `cols` receives the im2col matrix for the backward pass.
    Tensor forward(const Tensor& x, RowMatrix& cols) const;
    /// Accumulates parameter gradients; returns the input gradient if wanted.
    Tensor backward(const Tensor& x_shape, const RowMatrix& cols, const Tensor& grad_out, bool want_input) ;
    void init(std::mt19937_64& rng);
    void zero_grad();
    void params(const std::string& prefix, std::vector<ParamRef>& out);
};

struct Dense {
    int in = 0;
    int out = 0;
    RowMatrix weight;  // out x in
    Eigen::VectorXd bias;
    RowMatrix grad_weight;
    Eigen::VectorXd grad_bias;

    Dense() = default;
    Dense(int in_dim, int out_dim);
    RowMatrix forward(const RowMatrix& x) const;
    RowMatrix backward(const RowMatrix& x, const RowMatrix& grad_out, bool want_input);
    void init(std::mt19937_64& rng);
    void zero_grad();
    void params(const std::string& prefix, std::vector<ParamRef>& out);
};

Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Tensor& grad_out, int h, int w);
Tensor upsample2(const Tensor& x);
Tensor upsample2_backward(const Tensor& grad_out);

/// Bilinear lookup of all channels at (u, v) in tensor pixel-index coordinates
/// (clamped to the edge). Weights and the four taps are returned for the
/// backward scatter.
struct BilinearTap {
    int x0, y0, x1, y1;
    double w00, w10, w01, w11;
};
BilinearTap bilinear_tap(const Tensor& t, double u, double v);
void bilinear_gather(const Tensor& t, const BilinearTap& tap, double* out);
void bilinear_scatter(Tensor& grad, const BilinearTap& tap, const double* g);

} // namespace hsdf::neural
