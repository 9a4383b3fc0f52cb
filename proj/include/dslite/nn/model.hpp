#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dslite/augment.hpp"
#include "dslite/frontend.hpp"
#include "dslite/image.hpp"
#include "dslite/nn/layers.hpp"

namespace dslite::nn {

// Extractor layout: optional stem max-pool, then `blocks` dense blocks of
// [conv -> batch norm -> relu] whose relu output is concatenated onto the
// block input, 2x2 max-pool between blocks, and global average pooling.
struct ArchSpec {
  int stem_pool = 2;  // 0 or 1 disables the stem
  int blocks = 3;
  int convs_per_block = 1;
  int growth = 8;
  int kernel = 3;
  int input_side = kImageSide;

  bool operator==(const ArchSpec&) const = default;
};

struct HeadSpec {
  int classifier_units = 512;  // 0 -> no hidden layer
  double dropout_rate = 0.25;
  int classes = 2;
};

// Per-layer gradients in params() order; a layer that does not update has
// an empty entry.
struct Gradients {
  std::vector<std::vector<std::vector<double>>> layers;

  bool empty() const;
  std::size_t parameter_count() const;
};

// Everything a training forward leaves behind for backward.
struct ForwardCache {
  std::vector<Tensor> acts;  // acts[0] = input, acts[i + 1] = output of layer i
  std::vector<Tensor> own;   // pre-concat output, only for concatenating layers
  std::vector<LayerCache> layers;
  std::uint64_t generation = 0;
  bool training = false;
};

struct ForwardResult {
  Tensor probs;     // (N, C)
  Tensor features;  // (N, F): input of the final dense layer
  ForwardCache cache;
};

class Model {
 public:
  Model() = default;
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  // Layers [0, extractor_layers) form the extractor, the rest the head.
  std::vector<std::unique_ptr<Layer>> layers;
  int extractor_layers = 0;
  Shape input_shape{3, kImageSide, kImageSide};
  std::vector<std::string> class_labels;
  PreprocessFingerprint fingerprint;
  std::uint32_t config_hash = 0;

  int classes() const;
  int layer_count() const { return static_cast<int>(layers.size()); }
  // Per-sample output shape of every activation; throws on inconsistency.
  std::vector<Shape> activation_shapes() const;
  // Same walk from an arbitrary per-sample input shape.
  std::vector<Shape> activation_shapes(const Shape& input) const;
  int feature_width() const;

  // A training forward also advances batch-norm running statistics.
  ForwardResult forward(const Tensor& batch, bool training, Rng* rng = nullptr) const;
  // Gradients of mean cross entropy. Throws InvariantError when the cache is
  // stale or came from an inference forward.
  Gradients backward(const ForwardCache& cache, std::span<const LabelVector> targets) const;

  void freeze_extractor(bool frozen);
  // Unfreezes the last k extractor layers; throws ConfigError if k exceeds
  // the extractor depth.
  void unfreeze_last(int k);

  // Any parameter mutation must go through here so old caches go stale.
  void touch() { ++generation_; }
  std::uint64_t generation() const { return generation_; }

  std::size_t parameter_count(bool trainable_only = true) const;

 private:
  std::uint64_t generation_ = 0;
};

Model build_model(const ArchSpec& arch, const HeadSpec& head, Rng& rng);

// Number of extractor layers build_model produces for `arch`.
int extractor_depth(const ArchSpec& arch);

Tensor to_batch(std::span<const ImageTensor> images);

// L_i = -sum_c t_ic log(max(p_ic, 1e-12)).
struct Loss {
  std::vector<double> per_sample;
  double mean = 0.0;
};
Loss cross_entropy(const Tensor& probs, std::span<const LabelVector> targets);

// Inference features for one image.
std::vector<double> extract_features(const Model& m, const ImageTensor& img);

}  // namespace dslite::nn
