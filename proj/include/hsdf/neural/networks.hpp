#pragma once

#include "hsdf/geom/camera.hpp"
#include "hsdf/geom/image.hpp"
#include "hsdf/neural/layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hsdf::neural {

enum class ExtractorKind { HourglassLite, ShallowConv };

std::string to_string(ExtractorKind k);
ExtractorKind extractor_kind_from_string(const std::string& s);

/// Image + semantic labels as the 4-channel network input: RGB, then label / 3.
Tensor make_input(const Image& rgb, const Image& labels);

/// HourglassLite: two stride-2 convs to 1/4 resolution, one pooled hourglass
/// level with an additive skip, 1x1 projection to 32 channels.
/// ShallowConv: three stride-1 3x3 convs to 16 channels at full resolution.
class FeatureExtractor {
public:
    struct Cache {
        Tensor input;
        std::vector<Tensor> pre;       // pre-activations
        std::vector<Tensor> inputs;    // per-conv inputs (shape only is needed)
        std::vector<RowMatrix> cols;
    };

    FeatureExtractor() = default;
    explicit FeatureExtractor(ExtractorKind kind);

    ExtractorKind kind() const { return kind_; }
    int out_channels() const;
    /// Input pixels per feature pixel.
    int stride() const { return kind_ == ExtractorKind::HourglassLite ? 4 : 1; }

    Tensor forward(const Tensor& input, Cache* cache = nullptr) const;
    void backward(const Cache& cache, const Tensor& grad_out);

    void init(std::mt19937_64& rng);
    void zero_grad();
    void params(std::vector<ParamRef>& out);
    std::vector<Conv2d>& convs() { return convs_; }
    const std::vector<Conv2d>& convs() const { return convs_; }

private:
    ExtractorKind kind_ = ExtractorKind::ShallowConv;
    std::vector<Conv2d> convs_;
};

/// MLP [C+1, 128, 64, 1] by default; leaky ReLU on hidden layers, linear output.
class ImplicitHead {
public:
    struct Cache {
        std::vector<RowMatrix> inputs;  // input of each layer
        std::vector<RowMatrix> pre;     // pre-activation of each hidden layer
    };

    ImplicitHead() = default;
    explicit ImplicitHead(std::vector<int> sizes);

    const std::vector<int>& sizes() const { return sizes_; }
    RowMatrix forward(const RowMatrix& x, Cache* cache = nullptr) const;
    RowMatrix backward(const Cache& cache, const RowMatrix& grad_out);

    void init(std::mt19937_64& rng);
    void zero_grad();
    void params(std::vector<ParamRef>& out);
    std::vector<Dense>& layers() { return layers_; }

private:
    std::vector<int> sizes_;
    std::vector<Dense> layers_;
};

/// Three-level encoder-decoder producing front (0..2) and back (3..5) normals.
class NormalRegressor {
public:
    struct Cache {
        std::vector<Tensor> pre;
        std::vector<Tensor> inputs;
        std::vector<RowMatrix> cols;
    };

    NormalRegressor();

    Tensor forward(const Tensor& input, Cache* cache = nullptr) const;
    void backward(const Cache& cache, const Tensor& grad_out);

    void init(std::mt19937_64& rng);
    void zero_grad();
    void params(std::vector<ParamRef>& out);

private:
    std::vector<Conv2d> convs_;
};

/// Extractor + head: one level of the implicit field. `output_scale` converts
/// head outputs to millimetres.
struct ImplicitModel {
    FeatureExtractor extractor;
    ImplicitHead head;
    double output_scale = 1.0;

    static ImplicitModel make(ExtractorKind kind, std::uint64_t seed);
    void zero_grad();
    std::vector<ParamRef> params();
    std::size_t param_count();
};

Tensor extract_features(const FeatureExtractor& ex, const Image& rgb, const Image& labels);

/// Projects each point, samples the features bilinearly, appends z and runs the
/// head. Returns raw head outputs in input order. Out-of-box points throw.
std::vector<double> eval_implicit(const ImplicitHead& head, const Tensor& features, const CropAlignedCamera& camera,
                                  const std::vector<Vec3>& points);

/// Front/back normal maps from the regressor: masked by labels > 0 and
/// renormalized per pixel (zero stays zero).
struct PredictedNormals {
    Image front;
    Image back;
};
PredictedNormals regress_normals(const NormalRegressor& net, const Image& rgb, const Image& labels);

} // namespace hsdf::neural
