#pragma once

// Central finite-difference checks for layers and whole models. Errors are
// measured per tensor as |a - n| / (|a| + |n|) in the Euclidean norm.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dslite/nn/layers.hpp"
#include "dslite/nn/model.hpp"

namespace dslite::test {

inline constexpr double kFdStep = 1e-3;

struct GradCheck {
  double max_error = 0.0;
  std::string worst;
  int tensors = 0;

  void add(const std::vector<double>& analytic, const std::vector<double>& numeric, const std::string& what) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    const double err = denom < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / denom;
    ++tensors;
    if (err > max_error || worst.empty()) {
      max_error = std::max(max_error, err);
      worst = what;
    }
  }
};

// Inputs kept away from kinks (0 for rectifiers) and from ties (max-pool).
inline nn::Tensor gradcheck_input(nn::LayerKind kind, nn::Shape batch_shape, std::mt19937_64& rng) {
  nn::Tensor x(std::move(batch_shape));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (kind == nn::LayerKind::kMaxPool) {
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = 0.01 * static_cast<double>(perm[i]) - 1.0;
    return x;
  }
  for (double& v : x.data) {
    v = u(rng);
    if (kind == nn::LayerKind::kRelu || kind == nn::LayerKind::kArelu) {
      while (std::abs(v) < 0.05) v = u(rng);
    }
  }
  return x;
}

inline GradCheck check_layer(nn::Layer& layer, const nn::Tensor& x, bool training, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Tensor probe;
  auto run = [&](const nn::Tensor& in, nn::LayerCache& cache) {
    std::mt19937_64 drop(seed ^ 0x5eedULL);
    const nn::ForwardContext ctx{training, &drop};
    return layer.forward(in, cache, ctx);
  };
  auto loss = [&](const nn::Tensor& in) {
    nn::LayerCache cache;
    const nn::Tensor y = run(in, cache);
    return std::inner_product(y.data.begin(), y.data.end(), probe.data.begin(), 0.0);
  };

  nn::LayerCache cache;
  const nn::Tensor y = run(x, cache);
  probe = nn::Tensor(y.shape);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : probe.data) v = u(rng);

  std::vector<std::vector<double>> pgrads;
  const nn::Tensor dx = layer.backward(x, y, probe, cache, true, layer.updates() ? &pgrads : nullptr);

  GradCheck out;
  std::vector<double> numeric(x.size());
  nn::Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp.data[i] = x.data[i] + kFdStep;
    const double up = loss(xp);
    xp.data[i] = x.data[i] - kFdStep;
    const double down = loss(xp);
    xp.data[i] = x.data[i];
    numeric[i] = (up - down) / (2.0 * kFdStep);
  }
  out.add(dx.data, numeric, nn::to_string(layer.kind()) + " input");

  std::size_t k = 0;
  for (auto& p : layer.params()) {
    if (!p.trainable || !layer.updates()) continue;
    std::vector<double> pn(p.value.size());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double keep = p.value[i];
      p.value[i] = keep + kFdStep;
      const double up = loss(x);
      p.value[i] = keep - kFdStep;
      const double down = loss(x);
      p.value[i] = keep;
      pn[i] = (up - down) / (2.0 * kFdStep);
    }
    out.add(pgrads.at(k++), pn, nn::to_string(layer.kind()) + " " + p.name);
  }
  return out;
}

// A random small configuration of `kind`, checked in both modes where the
// layer distinguishes them.
inline GradCheck check_random_layer(nn::LayerKind kind, std::uint64_t seed) {
  using nn::LayerKind;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> small(1, 3), side(3, 6), width(2, 7);
  const int n = small(rng) + 1;
  std::unique_ptr<nn::Layer> layer;
  nn::Shape in;
  bool training = true;
  switch (kind) {
    case LayerKind::kConv2d: {
      const int cin = small(rng), cout = small(rng), k = std::uniform_int_distribution<int>(0, 1)(rng) ? 3 : 1;
      layer = nn::make_conv2d(cin, cout, k, rng);
      std::uniform_real_distribution<double> b(-0.5, 0.5);
      for (double& v : layer->params()[1].value) v = b(rng);
      in = {cin, side(rng), side(rng)};
      break;
    }
    case LayerKind::kBatchNorm: {
      const int c = small(rng);
      layer = nn::make_batch_norm(c);
      std::uniform_real_distribution<double> g(0.5, 1.5), b(-0.5, 0.5), v(0.5, 2.0);
      for (double& x : layer->params()[0].value) x = g(rng);
      for (double& x : layer->params()[1].value) x = b(rng);
      for (double& x : layer->params()[2].value) x = b(rng);
      for (double& x : layer->params()[3].value) x = v(rng);
      in = {c, side(rng), side(rng)};
      training = seed % 2 == 0;
      break;
    }
    case LayerKind::kMaxPool:
      layer = nn::make_max_pool(2);
      in = {small(rng), 2 * small(rng) + 1, 2 * small(rng)};
      break;
    case LayerKind::kGlobalAvgPool:
      layer = nn::make_global_avg_pool();
      in = {small(rng), side(rng), side(rng)};
      break;
    case LayerKind::kDense: {
      const int i = width(rng), o = width(rng);
      layer = nn::make_dense(i, o, rng);
      std::uniform_real_distribution<double> b(-0.5, 0.5);
      for (double& v : layer->params()[1].value) v = b(rng);
      in = {i};
      break;
    }
    case LayerKind::kDropout:
      layer = nn::make_dropout(std::uniform_real_distribution<double>(0.0, 0.6)(rng));
      in = {width(rng)};
      break;
    case LayerKind::kArelu: {
      const double alpha = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
      const double beta = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
      layer = nn::make_arelu(alpha, beta);
      in = {small(rng), side(rng)};
      break;
    }
    case LayerKind::kRelu:
      layer = nn::make_relu();
      in = {small(rng), side(rng)};
      break;
    case LayerKind::kSoftmax:
      layer = nn::make_softmax();
      in = {width(rng)};
      break;
  }
  nn::Shape batch{n};
  batch.insert(batch.end(), in.begin(), in.end());
  const nn::Tensor x = gradcheck_input(kind, batch, rng);
  return check_layer(*layer, x, training, seed);
}

inline const std::vector<nn::LayerKind>& all_layer_kinds() {
  using nn::LayerKind;
  static const std::vector<LayerKind> kinds{LayerKind::kConv2d,  LayerKind::kBatchNorm, LayerKind::kMaxPool,
                                            LayerKind::kGlobalAvgPool, LayerKind::kDense, LayerKind::kDropout,
                                            LayerKind::kArelu, LayerKind::kRelu, LayerKind::kSoftmax};
  return kinds;
}

// Whole-model check of mean cross entropy against every updating parameter.
inline GradCheck check_model(nn::Model& m, const nn::Tensor& x, const std::vector<LabelVector>& targets,
                             std::uint64_t seed) {
  auto loss = [&]() {
    std::mt19937_64 drop(seed);
    return nn::cross_entropy(m.forward(x, true, &drop).probs, targets).mean;
  };
  std::mt19937_64 drop(seed);
  const auto fr = m.forward(x, true, &drop);
  const nn::Gradients g = m.backward(fr.cache, targets);
  GradCheck out;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (g.layers[i].empty()) continue;
    std::size_t k = 0;
    for (auto& p : m.layers[i]->params()) {
      if (!p.trainable) continue;
      std::vector<double> numeric(p.value.size());
      for (std::size_t e = 0; e < p.value.size(); ++e) {
        const double keep = p.value[e];
        p.value[e] = keep + kFdStep;
        const double up = loss();
        p.value[e] = keep - kFdStep;
        const double down = loss();
        p.value[e] = keep;
        numeric[e] = (up - down) / (2.0 * kFdStep);
      }
      out.add(g.layers[i][k++], numeric, "layer " + std::to_string(i) + " " + p.name);
    }
  }
  return out;
}

}  // namespace dslite::test
