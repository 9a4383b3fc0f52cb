#include "dslite/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "dslite/error.hpp"

namespace dslite::nn {

bool Gradients::empty() const {
  return std::all_of(layers.begin(), layers.end(), [](const auto& g) { return g.empty(); });
}

std::size_t Gradients::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    for (const auto& g : layer) n += g.size();
  }
  return n;
}

Model::Model(const Model& other)
    : extractor_layers(other.extractor_layers),
      input_shape(other.input_shape),
      class_labels(other.class_labels),
      fingerprint(other.fingerprint),
      config_hash(other.config_hash),
      generation_(other.generation_) {
  layers.reserve(other.layers.size());
  for (const auto& l : other.layers) {
    auto copy = make_layer(l->spec());
    for (std::size_t p = 0; p < l->params().size(); ++p) copy->params()[p].value = l->params()[p].value;
    layers.push_back(std::move(copy));
  }
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

int Model::classes() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if ((*it)->kind() == LayerKind::kDense) return static_cast<int>((*it)->spec_ints()[1]);
  }
  return 0;
}

std::vector<Shape> Model::activation_shapes() const { return activation_shapes(input_shape); }

std::vector<Shape> Model::activation_shapes(const Shape& input) const {
  std::vector<Shape> shapes{input};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Shape own = layers[i]->output_shape(shapes[i]);
    if (const auto a = layers[i]->concat_from) {
      if (*a < 0 || static_cast<std::size_t>(*a) > i) {
        throw InvariantError("layer " + std::to_string(i) + " concatenates a later activation");
      }
      const Shape& src = shapes[static_cast<std::size_t>(*a)];
      if (src.size() != 3 || own.size() != 3 || src[1] != own[1] || src[2] != own[2]) {
        throw InvariantError("layer " + std::to_string(i) + ": cannot concatenate " + to_string(src) +
                             " with " + to_string(own));
      }
      own[0] += src[0];
    }
    shapes.push_back(std::move(own));
  }
  return shapes;
}

namespace {

std::size_t final_dense_index(const Model& m) {
  const std::size_t n = m.layers.size();
  if (n < 2 || m.layers[n - 1]->kind() != LayerKind::kSoftmax || m.layers[n - 2]->kind() != LayerKind::kDense) {
    throw InvariantError("model must end in dense -> softmax");
  }
  return n - 2;
}

Tensor concat_channels(const Tensor& front, const Tensor& back) {
  Tensor out({front.batch(), front.dim(1) + back.dim(1), back.dim(2), back.dim(3)});
  const std::size_t fs = front.stride(), bs = back.stride();
  for (int s = 0; s < front.batch(); ++s) {
    std::copy_n(front.sample(s), fs, out.sample(s));
    std::copy_n(back.sample(s), bs, out.sample(s) + fs);
  }
  return out;
}

void add_into(Tensor& acc, const Tensor& g) {
  if (acc.data.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i];
}

}  // namespace

int Model::feature_width() const {
  return activation_shapes()[final_dense_index(*this)][0];
}

ForwardResult Model::forward(const Tensor& batch, bool training, Rng* rng) const {
  if (batch.shape.size() != input_shape.size() + 1 ||
      !std::equal(input_shape.begin(), input_shape.end(), batch.shape.begin() + 1) || batch.batch() < 1) {
    throw InvariantError("model input " + to_string(batch.shape) + " does not match (N, " +
                         to_string(input_shape).substr(1));
  }
  const std::size_t fd = final_dense_index(*this);
  const ForwardContext ctx{training, rng};
  ForwardResult r;
  ForwardCache& c = r.cache;
  c.training = training;
  c.generation = generation_;
  c.acts.reserve(layers.size() + 1);
  c.acts.push_back(batch);
  c.layers.resize(layers.size());
  c.own.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Tensor y = layers[i]->forward(c.acts[i], c.layers[i], ctx);
    if (const auto a = layers[i]->concat_from) {
      Tensor joined = concat_channels(c.acts[static_cast<std::size_t>(*a)], y);
      if (training) c.own[i] = std::move(y);
      y = std::move(joined);
    }
    c.acts.push_back(std::move(y));
  }
  r.probs = c.acts.back();
  r.features = c.acts[fd];
  return r;
}

Gradients Model::backward(const ForwardCache& cache, std::span<const LabelVector> targets) const {
  if (!cache.training) throw InvariantError("backward needs a cache from a training forward");
  if (cache.generation != generation_ || cache.acts.size() != layers.size() + 1) {
    throw InvariantError("backward called with a stale forward cache");
  }
  Gradients grads;
  grads.layers.resize(layers.size());
  std::size_t first = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i]->updates()) {
      first = i;
      break;
    }
  }
  if (first == layers.size()) return grads;

  const Tensor& probs = cache.acts.back();
  const int n = probs.batch();
  const std::size_t classes = probs.stride();
  if (targets.size() != static_cast<std::size_t>(n)) throw InvariantError("backward: target count mismatch");
  std::vector<Tensor> d(layers.size() + 1);
  d.back() = Tensor(probs.shape);
  for (int s = 0; s < n; ++s) {
    if (targets[static_cast<std::size_t>(s)].size() != classes) throw InvariantError("backward: target width mismatch");
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = probs.sample(s)[k];
      d.back().sample(s)[k] = p < 1e-12 ? 0.0 : -targets[static_cast<std::size_t>(s)][k] / (p * n);
    }
  }

  for (std::size_t i = layers.size(); i-- > first;) {
    const Layer& layer = *layers[i];
    Tensor dy = std::move(d[i + 1]);
    const Tensor* y = &cache.acts[i + 1];
    if (const auto a = layer.concat_from) {
      const auto src = static_cast<std::size_t>(*a);
      const Tensor& own = cache.own[i];
      const std::size_t fs = cache.acts[src].stride(), os = own.stride();
      if (src > first) {
        Tensor dsrc(cache.acts[src].shape);
        for (int s = 0; s < n; ++s) std::copy_n(dy.sample(s), fs, dsrc.sample(s));
        add_into(d[src], dsrc);
      }
      Tensor down(own.shape);
      for (int s = 0; s < n; ++s) std::copy_n(dy.sample(s) + fs, os, down.sample(s));
      dy = std::move(down);
      y = &own;
    }
    auto* pg = layer.updates() ? &grads.layers[i] : nullptr;
    Tensor dx = layer.backward(cache.acts[i], *y, dy, cache.layers[i], i > first, pg);
    if (i > first) add_into(d[i], dx);
  }
  return grads;
}

void Model::freeze_extractor(bool frozen) {
  for (int i = 0; i < extractor_layers; ++i) layers[static_cast<std::size_t>(i)]->frozen = frozen;
}

void Model::unfreeze_last(int k) {
  if (k < 0 || k > extractor_layers) {
    throw ConfigError("cannot fine-tune " + std::to_string(k) + " layers: the extractor has " +
                      std::to_string(extractor_layers));
  }
  for (int i = extractor_layers - k; i < extractor_layers; ++i) layers[static_cast<std::size_t>(i)]->frozen = false;
}

std::size_t Model::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    for (const auto& p : l->params()) {
      if (p.trainable || !trainable_only) n += p.value.size();
    }
  }
  return n;
}

int extractor_depth(const ArchSpec& a) {
  return (a.stem_pool > 1 ? 1 : 0) + (a.blocks - 1) + a.blocks * a.convs_per_block * 3 + 1;
}

Model build_model(const ArchSpec& arch, const HeadSpec& head, Rng& rng) {
  if (arch.blocks < 1 || arch.convs_per_block < 1 || arch.growth < 1 || arch.input_side < 1) {
    throw ConfigError("extractor needs at least one block, one conv per block and positive growth");
  }
  if (head.classes < 2) throw ConfigError("need at least two classes");
  if (head.classifier_units < 0) throw ConfigError("classifier_units must be nonnegative");

  Model m;
  m.input_shape = {3, arch.input_side, arch.input_side};
  int channels = 3;
  if (arch.stem_pool > 1) m.layers.push_back(make_max_pool(arch.stem_pool));
  for (int b = 0; b < arch.blocks; ++b) {
    if (b > 0) m.layers.push_back(make_max_pool(2));
    for (int c = 0; c < arch.convs_per_block; ++c) {
      const int block_input = static_cast<int>(m.layers.size());
      m.layers.push_back(make_conv2d(channels, arch.growth, arch.kernel, rng));
      m.layers.push_back(make_batch_norm(arch.growth));
      auto relu = make_relu();
      relu->concat_from = block_input;
      m.layers.push_back(std::move(relu));
      channels += arch.growth;
    }
  }
  m.layers.push_back(make_global_avg_pool());
  m.extractor_layers = static_cast<int>(m.layers.size());

  int width = channels;
  if (head.classifier_units > 0) {
    m.layers.push_back(make_dense(width, head.classifier_units, rng, 6.0));
    m.layers.push_back(make_arelu());
    m.layers.push_back(make_dropout(head.dropout_rate));
    width = head.classifier_units;
  }
  m.layers.push_back(make_dense(width, head.classes, rng, 3.0));
  m.layers.push_back(make_softmax());
  m.activation_shapes();
  for (int c = 0; c < head.classes; ++c) m.class_labels.push_back("class_" + std::to_string(c));
  return m;
}

Tensor to_batch(std::span<const ImageTensor> images) {
  if (images.empty()) throw InvariantError("to_batch: no images");
  const int h = images[0].height, w = images[0].width;
  Tensor t({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height != h || images[i].width != w) throw InvariantError("to_batch: mixed image sizes");
    std::copy(images[i].values.begin(), images[i].values.end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

Loss cross_entropy(const Tensor& probs, std::span<const LabelVector> targets) {
  if (probs.shape.size() != 2 || targets.size() != static_cast<std::size_t>(probs.batch())) {
    throw InvariantError("cross_entropy: shape mismatch");
  }
  Loss l;
  const std::size_t c = probs.stride();
  for (int s = 0; s < probs.batch(); ++s) {
    const auto& t = targets[static_cast<std::size_t>(s)];
    if (t.size() != c) throw InvariantError("cross_entropy: target width mismatch");
    double v = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      if (t[k] != 0.0) v -= t[k] * std::log(std::max(probs.sample(s)[k], 1e-12));
    }
    l.per_sample.push_back(v);
    l.mean += v;
  }
  l.mean /= static_cast<double>(probs.batch());
  return l;
}

std::vector<double> extract_features(const Model& m, const ImageTensor& img) {
  const ForwardResult r = m.forward(to_batch(std::span(&img, 1)), false);
  return r.features.data;
}

}  // namespace dslite::nn
