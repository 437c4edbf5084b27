#ifndef DMTLR_LAYERS_HPP
#define DMTLR_LAYERS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmtlr/rng.hpp"
#include "dmtlr/tensor.hpp"

namespace dmtlr::nn {

enum class Activation { kReLU, kLinear };
enum class Padding { kValid, kSame };
enum class Mode { kTrain, kEval };

// Tagged description of one layer. Image tensors are NHWC; dense activations
// are (batch, features).
struct LayerSpec {
  enum class Kind { kDense, kConv2d, kMaxPool2d, kFlatten, kDropout, kConcat };

  Kind kind = Kind::kDense;
  int in_dim = 0, out_dim = 0;                  // dense
  int in_channels = 0, out_channels = 0;        // conv
  int kernel = 0, stride = 1;                   // conv & pool
  Padding padding = Padding::kValid;            // conv
  double rate = 0.0;                            // dropout
  Activation activation = Activation::kLinear;  // dense & conv

  static LayerSpec dense(int in_dim, int out_dim, Activation act);
  static LayerSpec conv2d(int in_channels, int out_channels, int kernel,
                          int stride, Padding padding, Activation act);
  static LayerSpec max_pool2d(int kernel, int stride);
  static LayerSpec flatten();
  static LayerSpec dropout(double rate);
  static LayerSpec concat();

  bool has_params() const {
    return kind == Kind::kDense || kind == Kind::kConv2d;
  }
  std::string name() const;
};

// Weights plus their gradient accumulators. Layers without parameters carry
// an empty ParamSet. Gradients always shape-match their parameter tensors.
struct ParamSet {
  Tensor weights;
  Tensor biases;
  Tensor weight_grad;
  Tensor bias_grad;
  bool trainable = true;

  bool empty() const { return weights.data.empty() && biases.data.empty(); }
  std::int64_t parameter_count() const { return weights.numel() + biases.numel(); }
  void zero_grads() {
    weight_grad.fill(0.0);
    bias_grad.fill(0.0);
  }
};

// He-normal for ReLU layers, Glorot-uniform for Linear layers, zero biases.
ParamSet init_params(const LayerSpec& spec, Rng& rng);

// Activation record produced by forward and consumed by the matching backward.
struct ForwardCache {
  LayerSpec::Kind kind = LayerSpec::Kind::kDense;
  Mode mode = Mode::kEval;
  Tensor input;  // kept for dense/conv weight gradients
  std::vector<int> input_shape;
  std::vector<int> output_shape;
  std::vector<std::uint8_t> relu_mask;  // activation sign, dense/conv ReLU
  std::vector<std::int64_t> argmax;     // max-pool winners (flat input index)
  std::vector<double> mask;             // dropout scaled mask (0 or 1/(1-rate))
  std::vector<int> part_widths;         // concat partition
};

// Runs one layer. `rng` is consumed only by Dropout in train mode; eval-mode
// Dropout is the identity. Shape mismatches throw with both shapes named.
Tensor forward(const LayerSpec& spec, const ParamSet& params, const Tensor& input,
               Mode mode, Rng* rng, ForwardCache* cache = nullptr);

// Propagates grad_out through a cached forward call. Accumulates into
// params.weight_grad / params.bias_grad and returns the input gradient.
Tensor backward(const LayerSpec& spec, ParamSet& params, const ForwardCache& cache,
                const Tensor& grad_out);

// Feature-axis concatenation of (batch, d_i) parts and its exact inverse.
Tensor concat_forward(std::span<const Tensor> parts, ForwardCache* cache = nullptr);
std::vector<Tensor> concat_backward(const ForwardCache& cache, const Tensor& grad_out);

// An ordered layer stack with aligned parameters.
struct Sequential {
  std::vector<LayerSpec> layers;
  std::vector<ParamSet> params;

  void append(const LayerSpec& spec, Rng& rng);

  Tensor forward(const Tensor& input, Mode mode, Rng* rng,
                 std::vector<ForwardCache>* caches = nullptr) const;
  // Returns the gradient w.r.t. the stack input; accumulates parameter grads.
  Tensor backward(const std::vector<ForwardCache>& caches, const Tensor& grad_out);

  std::int64_t parameter_count() const;
  void set_trainable(bool trainable);
  void zero_grads();
};

std::uint64_t hash_params(const std::vector<ParamSet>& params);

}  // namespace dmtlr::nn

#endif  // DMTLR_LAYERS_HPP
