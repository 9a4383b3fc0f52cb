#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dslite/nn/tensor.hpp"

namespace dslite::nn {

using Rng = std::mt19937_64;

enum class LayerKind : std::uint8_t {
  kConv2d = 1,
  kBatchNorm = 2,
  kMaxPool = 3,
  kGlobalAvgPool = 4,
  kDense = 5,
  kDropout = 6,
  kArelu = 7,
  kRelu = 8,
  kSoftmax = 9,
};

std::string to_string(LayerKind k);

// A named parameter or state buffer. Buffers (trainable == false) are saved
// with the model but never receive gradients.
struct Param {
  std::string name;
  Shape shape;
  std::vector<double> value;
  bool trainable = true;
};

// Architecture record: everything except parameter values.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::vector<std::int64_t> ints;
  std::vector<double> reals;
  bool frozen = false;
  // Activation index whose channels are prepended to this layer's output
  // (0 = model input, i + 1 = output of layer i).
  std::optional<int> concat_from;

  bool operator==(const LayerSpec&) const = default;
};

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required by dropout in training mode
};

// Per-layer scratch saved by forward for backward.
struct LayerCache {
  std::vector<double> values;
  std::vector<std::uint32_t> indices;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  // Per-sample output shape for a per-sample input shape; throws on mismatch.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x, LayerCache& cache, const ForwardContext& ctx) = 0;
  // Returns dL/dx (empty when !need_input_grad). When the layer is trainable,
  // parameter gradients are written to `param_grads` in params() order.
  virtual Tensor backward(const Tensor& x, const Tensor& y, const Tensor& dy,
                          const LayerCache& cache, bool need_input_grad,
                          std::vector<std::vector<double>>* param_grads) const = 0;
  // Analytic FLOPs per sample (2 per multiply-accumulate).
  virtual std::uint64_t flops(const Shape& in) const = 0;
  virtual std::vector<std::int64_t> spec_ints() const { return {}; }
  virtual std::vector<double> spec_reals() const { return {}; }
  // Re-apply parameter constraints after an update.
  virtual void constrain() {}

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  bool has_trainable() const;
  bool updates() const { return !frozen && has_trainable(); }

  LayerSpec spec() const;

  bool frozen = false;
  std::optional<int> concat_from;

 protected:
  std::vector<Param> params_;
};

std::unique_ptr<Layer> make_conv2d(int in_channels, int out_channels, int kernel, Rng& rng);
std::unique_ptr<Layer> make_batch_norm(int channels, double momentum = 0.9, double epsilon = 1e-3);
std::unique_ptr<Layer> make_max_pool(int size = 2);
std::unique_ptr<Layer> make_global_avg_pool();
// limit = sqrt(gain / fan_in) for the uniform initializer.
std::unique_ptr<Layer> make_dense(int in, int out, Rng& rng, double gain = 6.0);
std::unique_ptr<Layer> make_dropout(double rate);
std::unique_ptr<Layer> make_arelu(double alpha = 0.9, double beta = 2.0);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_softmax();

// Rebuilds a layer from its record; parameters are zero-filled.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

inline constexpr double kAreluAlphaMin = 0.01;
inline constexpr double kAreluAlphaMax = 0.99;

double sigmoid(double x);

}  // namespace dslite::nn
