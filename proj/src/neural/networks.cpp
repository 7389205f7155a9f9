#include "hsdf/neural/networks.hpp"

#include "hsdf/geom/error.hpp"
#include "hsdf/geom/parallel.hpp"

#include <cmath>

namespace hsdf::neural {

std::string to_string(ExtractorKind k)
{
    return k == ExtractorKind::HourglassLite ? "hourglass_lite" : "shallow_conv";
}

ExtractorKind extractor_kind_from_string(const std::string& s)
{
    if (s == "hourglass_lite") {
        return ExtractorKind::HourglassLite;
    }
    if (s == "shallow_conv") {
        return ExtractorKind::ShallowConv;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown extractor kind: " + s);
}

Tensor make_input(const Image& rgb, const Image& labels)
{
    require(rgb.channels == 3, ErrorCode::InvalidArgument, "network input needs an RGB image");
    require(rgb.width == labels.width && rgb.height == labels.height, ErrorCode::SizeMismatch,
            "image and mask sizes differ");
    Tensor t(4, rgb.height, rgb.width);
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                t.at(c, y, x) = rgb.at(x, y, c);
            }
            t.at(3, y, x) = labels.at(x, y, 0) / 3.0;
        }
    }
    return t;
}

namespace {

Tensor activated(const Tensor& pre)
{
    Tensor t = pre;
    leaky_relu_inplace(t.data.data(), t.data.size());
    return t;
}

void add_into(Tensor& a, const Tensor& b)
{
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] += b.data[i];
    }
}

Tensor masked_grad(const Tensor& pre, Tensor g)
{
    leaky_relu_backward(pre.data.data(), g.data.data(), g.data.size());
    return g;
}

// Small helper that runs one conv and records what its backward pass needs.
struct Recorder {
    std::vector<Tensor>* inputs;
    std::vector<RowMatrix>* cols;

    Tensor run(const Conv2d& conv, const Tensor& x)
    {
        RowMatrix c;
        Tensor y = conv.forward(x, c);
        if (inputs) {
            inputs->push_back(Tensor(x.c, x.h, x.w));
            cols->push_back(std::move(c));
        }
        return y;
    }
};

} // namespace

FeatureExtractor::FeatureExtractor(ExtractorKind kind) : kind_(kind)
{
    if (kind == ExtractorKind::HourglassLite) {
        convs_ = {Conv2d(4, 8, 3, 2), Conv2d(8, 16, 3, 2), Conv2d(16, 16, 3, 1), Conv2d(16, 32, 1, 1)};
    } else {
        convs_ = {Conv2d(4, 16, 3, 1), Conv2d(16, 16, 3, 1), Conv2d(16, 16, 3, 1)};
    }
}

int FeatureExtractor::out_channels() const { return convs_.back().out; }

Tensor FeatureExtractor::forward(const Tensor& input, Cache* cache) const
{
    require(input.c == 4, ErrorCode::SizeMismatch, "extractor expects 4 input channels");
    if (kind_ == ExtractorKind::HourglassLite) {
        require(input.h % 8 == 0 && input.w % 8 == 0, ErrorCode::SizeMismatch,
                "hourglass input size must be a multiple of 8");
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    Recorder rec{cache ? &c.inputs : nullptr, cache ? &c.cols : nullptr};
    auto keep = [&](Tensor t) {
        if (cache) {
            c.pre.push_back(t);
        }
        return activated(t);
    };
    if (kind_ == ExtractorKind::HourglassLite) {
        const Tensor h1 = keep(rec.run(convs_[0], input));
        const Tensor h2 = keep(rec.run(convs_[1], h1));
        const Tensor p = avg_pool2(h2);
        const Tensor h3 = keep(rec.run(convs_[2], p));
        Tensor s = upsample2(h3);
        add_into(s, h2);
        return rec.run(convs_[3], s);
    }
    const Tensor h1 = keep(rec.run(convs_[0], input));
    const Tensor h2 = keep(rec.run(convs_[1], h1));
    return rec.run(convs_[2], h2);
}

void FeatureExtractor::backward(const Cache& c, const Tensor& grad_out)
{
    if (kind_ == ExtractorKind::HourglassLite) {
        const Tensor gs = convs_[3].backward(c.inputs[3], c.cols[3], grad_out, true);
        Tensor g_h2 = gs;
        const Tensor g_a3 = masked_grad(c.pre[2], upsample2_backward(gs));
        const Tensor g_p = convs_[2].backward(c.inputs[2], c.cols[2], g_a3, true);
        add_into(g_h2, avg_pool2_backward(g_p, g_h2.h, g_h2.w));
        const Tensor g_h1 = convs_[1].backward(c.inputs[1], c.cols[1], masked_grad(c.pre[1], g_h2), true);
        convs_[0].backward(c.inputs[0], c.cols[0], masked_grad(c.pre[0], g_h1), false);
        return;
    }
    const Tensor g_h2 = convs_[2].backward(c.inputs[2], c.cols[2], grad_out, true);
    const Tensor g_h1 = convs_[1].backward(c.inputs[1], c.cols[1], masked_grad(c.pre[1], g_h2), true);
    convs_[0].backward(c.inputs[0], c.cols[0], masked_grad(c.pre[0], g_h1), false);
}

void FeatureExtractor::init(std::mt19937_64& rng)
{
    for (auto& conv : convs_) {
        conv.init(rng);
    }
}

void FeatureExtractor::zero_grad()
{
    for (auto& conv : convs_) {
        conv.zero_grad();
    }
}

void FeatureExtractor::params(std::vector<ParamRef>& out)
{
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].params("extractor.conv" + std::to_string(i), out);
    }
}

ImplicitHead::ImplicitHead(std::vector<int> sizes) : sizes_(std::move(sizes))
{
    require(sizes_.size() >= 2 && sizes_.back() == 1, ErrorCode::InvalidArgument, "head must end in one output");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
        layers_.emplace_back(sizes_[i], sizes_[i + 1]);
    }
}

RowMatrix ImplicitHead::forward(const RowMatrix& x, Cache* cache) const
{
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    RowMatrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        RowMatrix y = layers_[i].forward(h);
        if (cache) {
            cache->inputs.push_back(std::move(h));
        }
        if (i + 1 < layers_.size()) {
            if (cache) {
                cache->pre.push_back(y);
            }
            leaky_relu_inplace(y.data(), y.size());
        }
        h = std::move(y);
    }
    return h;
}

RowMatrix ImplicitHead::backward(const Cache& cache, const RowMatrix& grad_out)
{
    RowMatrix g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        if (i + 1 < layers_.size()) {
            leaky_relu_backward(cache.pre[i].data(), g.data(), g.size());
        }
        g = layers_[i].backward(cache.inputs[i], g, true);
    }
    return g;
}

void ImplicitHead::init(std::mt19937_64& rng)
{
    for (auto& l : layers_) {
        l.init(rng);
    }
}

void ImplicitHead::zero_grad()
{
    for (auto& l : layers_) {
        l.zero_grad();
    }
}

void ImplicitHead::params(std::vector<ParamRef>& out)
{
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].params("head.fc" + std::to_string(i), out);
    }
}

NormalRegressor::NormalRegressor()
    : convs_{Conv2d(4, 8, 3, 1),  Conv2d(8, 16, 3, 2), Conv2d(16, 16, 3, 2),
             Conv2d(16, 16, 3, 1), Conv2d(16, 8, 3, 1), Conv2d(8, 6, 3, 1)}
{
}

Tensor NormalRegressor::forward(const Tensor& input, Cache* cache) const
{
    require(input.c == 4, ErrorCode::SizeMismatch, "normal regressor expects 4 input channels");
    require(input.h % 4 == 0 && input.w % 4 == 0, ErrorCode::SizeMismatch,
            "normal regressor input size must be a multiple of 4");
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    Recorder rec{cache ? &c.inputs : nullptr, cache ? &c.cols : nullptr};
    auto keep = [&](Tensor t) {
        if (cache) {
            c.pre.push_back(t);
        }
        return activated(t);
    };
    const Tensor h0 = keep(rec.run(convs_[0], input));
    const Tensor h1 = keep(rec.run(convs_[1], h0));
    const Tensor h2 = keep(rec.run(convs_[2], h1));
    Tensor u1 = upsample2(h2);
    add_into(u1, h1);
    const Tensor h3 = keep(rec.run(convs_[3], u1));
    Tensor h4 = keep(rec.run(convs_[4], upsample2(h3)));
    add_into(h4, h0);
    return rec.run(convs_[5], h4);
}

void NormalRegressor::backward(const Cache& c, const Tensor& grad_out)
{
    const Tensor g_s = convs_[5].backward(c.inputs[5], c.cols[5], grad_out, true);
    Tensor g_h0 = g_s;
    const Tensor g_u0 = convs_[4].backward(c.inputs[4], c.cols[4], masked_grad(c.pre[4], g_s), true);
    const Tensor g_h3 = upsample2_backward(g_u0);
    const Tensor g_u1 = convs_[3].backward(c.inputs[3], c.cols[3], masked_grad(c.pre[3], g_h3), true);
    Tensor g_h1 = g_u1;
    const Tensor g_h2 = upsample2_backward(g_u1);
    add_into(g_h1, convs_[2].backward(c.inputs[2], c.cols[2], masked_grad(c.pre[2], g_h2), true));
    add_into(g_h0, convs_[1].backward(c.inputs[1], c.cols[1], masked_grad(c.pre[1], g_h1), true));
    convs_[0].backward(c.inputs[0], c.cols[0], masked_grad(c.pre[0], g_h0), false);
}

void NormalRegressor::init(std::mt19937_64& rng)
{
    for (auto& conv : convs_) {
        conv.init(rng);
    }
}

void NormalRegressor::zero_grad()
{
    for (auto& conv : convs_) {
        conv.zero_grad();
    }
}

void NormalRegressor::params(std::vector<ParamRef>& out)
{
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].params("normal.conv" + std::to_string(i), out);
    }
}

ImplicitModel ImplicitModel::make(ExtractorKind kind, std::uint64_t seed)
{
    ImplicitModel m;
    m.extractor = FeatureExtractor(kind);
    m.head = ImplicitHead({m.extractor.out_channels() + 1, 128, 64, 1});
    std::mt19937_64 rng(seed);
    m.extractor.init(rng);
    m.head.init(rng);
    return m;
}

void ImplicitModel::zero_grad()
{
    extractor.zero_grad();
    head.zero_grad();
}

std::vector<ParamRef> ImplicitModel::params()
{
    std::vector<ParamRef> out;
    extractor.params(out);
    head.params(out);
    return out;
}

std::size_t ImplicitModel::param_count()
{
    std::size_t n = 0;
    for (const auto& p : params()) {
        n += p.size;
    }
    return n;
}

Tensor extract_features(const FeatureExtractor& ex, const Image& rgb, const Image& labels)
{
    return ex.forward(make_input(rgb, labels));
}

std::vector<double> eval_implicit(const ImplicitHead& head, const Tensor& features, const CropAlignedCamera& camera,
                                  const std::vector<Vec3>& points)
{
    require(!head.sizes().empty() && head.sizes().front() == features.c + 1, ErrorCode::SizeMismatch,
            "head input width must be feature channels + 1");
    const double sx = static_cast<double>(camera.width) / features.w;
    const double sy = static_cast<double>(camera.height) / features.h;
    std::vector<double> out(points.size());
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (points.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t chunk = c0; chunk < c1; ++chunk) {
            const std::size_t begin = chunk * kChunk;
            const std::size_t end = std::min(points.size(), begin + kChunk);
            RowMatrix x(static_cast<Eigen::Index>(end - begin), features.c + 1);
            for (std::size_t i = begin; i < end; ++i) {
                require(camera.box.contains(points[i]), ErrorCode::OutOfDomain, "query point outside the camera box");
                const Projection p = project(camera, points[i]);
                const BilinearTap tap = bilinear_tap(features, p.u / sx - 0.5, p.v / sy - 0.5);
                double* row = x.row(static_cast<Eigen::Index>(i - begin)).data();
                bilinear_gather(features, tap, row);
                row[features.c] = p.z;
            }
            const RowMatrix y = head.forward(x);
            for (std::size_t i = begin; i < end; ++i) {
                out[i] = y(static_cast<Eigen::Index>(i - begin), 0);
            }
        }
    });
    return out;
}

PredictedNormals regress_normals(const NormalRegressor& net, const Image& rgb, const Image& labels)
{
    const Tensor y = net.forward(make_input(rgb, labels));
    PredictedNormals out{Image(rgb.width, rgb.height, 3), Image(rgb.width, rgb.height, 3)};
    for (int v = 0; v < rgb.height; ++v) {
        for (int u = 0; u < rgb.width; ++u) {
            if (labels.at(u, v) <= 0.5f) {
                continue;
            }
            for (int side = 0; side < 2; ++side) {
                Vec3 n(y.at(3 * side, v, u), y.at(3 * side + 1, v, u), y.at(3 * side + 2, v, u));
                const double len = n.norm();
                if (len <= 1e-12) {
                    continue;
                }
                n /= len;
                Image& dst = side == 0 ? out.front : out.back;
                for (int c = 0; c < 3; ++c) {
                    dst.at(u, v, c) = static_cast<float>(n[c]);
                }
            }
        }
    }
    return out;
}

} // namespace hsdf::neural
