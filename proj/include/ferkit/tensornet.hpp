#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ferkit/label_core.hpp"
#include "ferkit/rng.hpp"
#include "ferkit/schemes.hpp"
#include "ferkit/tensor.hpp"

namespace ferkit {

// A layer owns its parameters, gradient buffers and the forward cache
// needed for backward. One model instance serves one example at a time;
// parallel training clones the model per worker.
class Layer {
public:
    virtual ~Layer() = default;

    // rng is consumed only by stochastic layers in train mode.
    virtual Tensor forward(const Tensor& x, Rng* rng, bool train) = 0;

    // Gradient w.r.t. the layer input; accumulates into parameter grads.
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }

    virtual std::string kind() const = 0;
    virtual nlohmann::json spec() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
};

std::unique_ptr<Layer> make_conv(std::size_t in_ch, std::size_t out_ch);   // 3x3, pad 1, stride 1
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_maxpool();                                     // 2x2, stride 2
std::unique_ptr<Layer> make_dropout(double rate);                          // inverted dropout
std::unique_ptr<Layer> make_dense(std::size_t in_features, std::size_t out_features);
std::unique_ptr<Layer> make_softmax();

class Model {
public:
    Model() = default;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    // Runs the stack; output is the softmax distribution. The logits fed
    // into the softmax are kept alongside. Throws on shape mismatch,
    // naming the offending layer index.
    PredictedDistribution forward(const Tensor& input, Rng* rng, bool train);

    // Backpropagate from a gradient at the logits (the softmax input).
    // Requires a preceding forward call; caches are invalidated after.
    void backward(const std::vector<double>& grad_at_logits);

    void zero_grads();
    std::vector<Tensor*> parameters();
    std::vector<Tensor*> gradients();
    std::size_t param_count() const;

    std::size_t conv_layer_count() const;
    bool has_active_dropout() const;
    std::size_t output_size() const; // K of the final dense layer

    // He-style fan-in init, seeded.
    void init_params(Rng& rng);

    Model clone() const;

    nlohmann::json spec_json() const;
    static Model from_spec(const nlohmann::json& spec);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

// The custom VGG13: 10 conv layers in 4 blocks (64,64 / 128,128 /
// 256,256,256 / 256,256,256), each block closed by 2x2 maxpool and 25%
// dropout, then dense 1024 / 50% dropout twice and a dense-K softmax head.
Model build_vgg13(std::size_t input_size = 64, std::size_t k = 8);

// Same layer grammar at desk scale: `blocks` conv blocks starting at
// 8 kernels (doubling per block), one dense-64 hidden layer.
Model build_toy(std::size_t input_size, std::size_t k, std::size_t blocks);

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_tensor = 0; // index into Model::parameters()
    std::size_t worst_coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
};

// Central-difference check of the end-to-end parameter gradient of the
// scheme loss. Runs with dropout disabled; train_mode=true on a model
// with active dropout is refused (stochastic loss). The scheme target is
// frozen from the unperturbed forward pass so the compared function is
// smooth.
// max_coords = 0 sweeps every parameter coordinate; otherwise that many
// coordinates are sampled uniformly (for cheap repeated spot checks).
GradCheckReport gradient_check(Model& model,
                               const Tensor& input,
                               const LabelDistribution& dist,
                               const Scheme& scheme,
                               Rng& rng,
                               bool train_mode = false,
                               double eps = 1e-5,
                               std::size_t max_coords = 0);

} // namespace ferkit
