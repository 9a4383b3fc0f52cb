#include "dslite/augment.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dslite/error.hpp"

namespace dslite {

LabelVector one_hot(int label, int classes) {
  if (label < 0 || label >= classes) {
    throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  }
  LabelVector y(static_cast<std::size_t>(classes), 0.0);
  y[static_cast<std::size_t>(label)] = 1.0;
  return y;
}

void AugmentationPolicy::validate(int image_side) const {
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("augmentation shape a must lie in (0, 1)");
  if (!(s > 0.0)) throw ConfigError("augmentation scale s must be positive");
  if (!(p_min >= 0.0 && p_min <= p_max && p_max <= 1.0)) {
    throw ConfigError("execution probabilities need 0 <= p_min <= p_max <= 1");
  }
  if (cutmix_max_px < 0 || cutmix_max_px > image_side || specaug_max_px < 0 ||
      specaug_max_px > image_side) {
    throw ConfigError("augmentation sizes must lie in [0, image side]");
  }
}

std::vector<double> rank_losses(std::span<const double> losses) {
  if (losses.empty()) throw DataError("rank_losses: empty batch");
  for (double l : losses) {
    if (!std::isfinite(l)) throw DataError("rank_losses: non-finite loss");
  }
  const std::size_t n = losses.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return losses[i] < losses[j]; });
  std::vector<double> ranks(n, 0.0);
  if (n == 1) return ranks;
  for (std::size_t pos = 0; pos < n; ++pos) {
    ranks[order[pos]] = static_cast<double>(pos) / static_cast<double>(n - 1);
  }
  return ranks;
}

double policy_lambda(double r, const AugmentationPolicy& pol) {
  r = std::clamp(r, 0.0, 1.0);
  return 1.0 - boost::math::ibeta(pol.a * pol.s, (1.0 - pol.a) * pol.s, r);
}

double execution_probability(double lambda, const AugmentationPolicy& pol) {
  return pol.p_min + (pol.p_max - pol.p_min) * std::clamp(lambda, 0.0, 1.0);
}

namespace {

void require_same_shape(const ImageTensor& a, const ImageTensor& b) {
  if (a.height != b.height || a.width != b.width || a.stage != b.stage) {
    throw InvariantError("augmentation: image shape or stage mismatch");
  }
}

int band(double lambda, int max_px) {
  return static_cast<int>(std::lround(std::clamp(lambda, 0.0, 1.0) * max_px));
}

int position(int extent, int size, Rng& rng) {
  std::uniform_int_distribution<int> pos(0, std::max(0, extent - size));
  return pos(rng);
}

}  // namespace

Mixed cutmix(const ImageTensor& a, const ImageTensor& b, const LabelVector& ya,
             const LabelVector& yb, double lambda, const AugmentationPolicy& pol, Rng& rng) {
  require_same_shape(a, b);
  if (ya.size() != yb.size()) throw InvariantError("cutmix: label width mismatch");
  const int side = std::min({band(lambda, pol.cutmix_max_px), a.height, a.width});
  if (side == 0) return {a, ya};

  const int y0 = position(a.height, side, rng);
  const int x0 = position(a.width, side, rng);
  Mixed out{a, ya};
  for (int c = 0; c < 3; ++c) {
    for (int y = y0; y < y0 + side; ++y) {
      for (int x = x0; x < x0 + side; ++x) out.image.at(c, y, x) = b.at(c, y, x);
    }
  }
  const double f = static_cast<double>(side) * side / (static_cast<double>(a.height) * a.width);
  for (std::size_t k = 0; k < ya.size(); ++k) out.label[k] = (1.0 - f) * ya[k] + f * yb[k];
  return out;
}

ImageTensor spec_augment(const ImageTensor& img, double lambda, const AugmentationPolicy& pol,
                         Rng& rng) {
  const int width = std::min(band(lambda, pol.specaug_max_px), std::min(img.height, img.width));
  if (width == 0) return img;
  const int x0 = position(img.width, width, rng);
  const int y0 = position(img.height, width, rng);

  ImageTensor out = img;
  const std::size_t plane = img.plane();
  for (int c = 0; c < 3; ++c) {
    const auto begin = img.values.begin() + static_cast<std::ptrdiff_t>(c * plane);
    const double mean =
        std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(plane), 0.0) / plane;
    for (int y = 0; y < img.height; ++y) {
      const bool row_masked = y >= y0 && y < y0 + width;
      for (int x = 0; x < img.width; ++x) {
        if (row_masked || (x >= x0 && x < x0 + width)) out.at(c, y, x) = mean;
      }
    }
  }
  return out;
}

AugmentedBatch augment_batch(std::span<const ImageTensor> images,
                             std::span<const LabelVector> labels, std::span<const double> losses,
                             const AugmentationPolicy& pol, Rng& rng) {
  const std::size_t n = images.size();
  std::vector<double> ranks(n, 0.0);
  if (losses.empty()) {
    for (std::size_t i = 0; i < n && n > 1; ++i) ranks[i] = static_cast<double>(i) / (n - 1);
  } else {
    if (losses.size() != n) throw InvariantError("augment_batch: loss count mismatch");
    ranks = rank_losses(losses);
  }
  std::vector<double> lambdas(n);
  for (std::size_t i = 0; i < n; ++i) lambdas[i] = policy_lambda(ranks[i], pol);
  return augment_batch_with_lambdas(images, labels, lambdas, pol, rng);
}

AugmentedBatch augment_batch_with_lambdas(std::span<const ImageTensor> images,
                                          std::span<const LabelVector> labels,
                                          std::span<const double> lambdas,
                                          const AugmentationPolicy& pol, Rng& rng) {
  const std::size_t n = images.size();
  if (labels.size() != n || lambdas.size() != n) {
    throw InvariantError("augment_batch: images, labels and magnitudes differ in count");
  }
  for (std::size_t i = 1; i < n; ++i) require_same_shape(images[0], images[i]);

  AugmentedBatch out{{images.begin(), images.end()}, {labels.begin(), labels.end()}};
  if (!pol.any_enabled()) return out;

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = execution_probability(lambdas[i], pol);
    if (pol.cutmix && coin(rng) < p) {
      std::size_t partner = i;
      if (n > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 2);
        partner = pick(rng);
        if (partner >= i) ++partner;
      }
      Mixed m = cutmix(out.images[i], images[partner], out.labels[i], labels[partner], lambdas[i],
                       pol, rng);
      out.images[i] = std::move(m.image);
      out.labels[i] = std::move(m.label);
    }
    if (pol.spec_augment && coin(rng) < p) {
      out.images[i] = spec_augment(out.images[i], lambdas[i], pol, rng);
    }
  }
  return out;
}

}  // namespace dslite
