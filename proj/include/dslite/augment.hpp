#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "dslite/image.hpp"

namespace dslite {

using Rng = std::mt19937_64;

// Soft label: nonnegative, sums to 1.
using LabelVector = std::vector<double>;

LabelVector one_hot(int label, int classes);

// Loss-adaptive augmentation parameters. Defaults are the policy constants
// used for all reported configurations.
struct AugmentationPolicy {
  double a = 0.5;   // shape, in (0, 1)
  double s = 10.0;  // scale, > 0
  int cutmix_max_px = 56;
  int specaug_max_px = 67;
  double p_min = 0.10;
  double p_max = 0.25;
  bool cutmix = true;
  bool spec_augment = true;

  // Throws ConfigError when a field is out of range.
  void validate(int image_side = kImageSide) const;
  bool any_enabled() const { return cutmix || spec_augment; }
  bool operator==(const AugmentationPolicy&) const = default;
};

// r_i = rank(loss_i) / (B - 1), ascending, ties broken by index. A batch of
// one maps to 0. Throws DataError on non-finite losses.
std::vector<double> rank_losses(std::span<const double> losses);

// lambda(r) = 1 - I_r(a s, (1 - a) s): 1 at the easiest sample, 0 at the
// hardest.
double policy_lambda(double r, const AugmentationPolicy& pol);

// p_min + (p_max - p_min) * lambda.
double execution_probability(double lambda, const AugmentationPolicy& pol);

struct Mixed {
  ImageTensor image;
  LabelVector label;
};

// Pastes a round(lambda * cutmix_max_px) square from b into a at a uniform
// position; labels mix by pasted area fraction.
Mixed cutmix(const ImageTensor& a, const ImageTensor& b, const LabelVector& ya,
             const LabelVector& yb, double lambda, const AugmentationPolicy& pol, Rng& rng);

// One time band (columns) and one frequency band (rows), each
// round(lambda * specaug_max_px) wide, filled with the per-channel mean.
ImageTensor spec_augment(const ImageTensor& img, double lambda, const AugmentationPolicy& pol,
                         Rng& rng);

struct AugmentedBatch {
  std::vector<ImageTensor> images;
  std::vector<LabelVector> labels;
};

// Per sample: rank -> lambda -> p; CutMix with probability p (partner drawn
// from the rest of the batch) and SpecAugment with independent probability p.
// `losses` comes from the previous pass; when empty, ranks are uniform over
// batch positions.
AugmentedBatch augment_batch(std::span<const ImageTensor> images,
                             std::span<const LabelVector> labels, std::span<const double> losses,
                             const AugmentationPolicy& pol, Rng& rng);

// Same, with the per-sample magnitudes supplied directly.
AugmentedBatch augment_batch_with_lambdas(std::span<const ImageTensor> images,
                                          std::span<const LabelVector> labels,
                                          std::span<const double> lambdas,
                                          const AugmentationPolicy& pol, Rng& rng);

}  // namespace dslite
