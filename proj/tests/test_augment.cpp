#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dslite/augment.hpp"
#include "dslite/error.hpp"
#include "support/oracles.hpp"

using namespace dslite;

namespace {

ImageTensor random_image(Rng& rng, int side = 224) {
  ImageTensor img(side, side, ImageStage::kNormalized);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double& v : img.values) v = u(rng);
  return img;
}

double sum(const LabelVector& y) { return std::accumulate(y.begin(), y.end(), 0.0); }

std::size_t changed(const ImageTensor& a, const ImageTensor& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      bool diff = false;
      for (int c = 0; c < 3; ++c) diff = diff || a.at(c, y, x) != b.at(c, y, x);
      n += diff ? 1 : 0;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("policy defaults and validation") {
  AugmentationPolicy pol;
  CHECK(pol.a == 0.5);
  CHECK(pol.s == 10.0);
  CHECK(pol.cutmix_max_px == 56);
  CHECK(pol.specaug_max_px == 67);
  CHECK(pol.p_min == 0.10);
  CHECK(pol.p_max == 0.25);
  CHECK_NOTHROW(pol.validate());
  pol.a = 1.0;
  CHECK_THROWS_AS(pol.validate(), ConfigError);
  pol = {};
  pol.p_min = 0.5;
  pol.p_max = 0.4;
  CHECK_THROWS_AS(pol.validate(), ConfigError);
  pol = {};
  pol.cutmix_max_px = 300;
  CHECK_THROWS_AS(pol.validate(), ConfigError);
}

TEST_CASE("rank_losses") {
  CHECK(rank_losses(std::vector<double>{0.1, 0.9, 0.5}) == std::vector<double>{0.0, 1.0, 0.5});
  CHECK(rank_losses(std::vector<double>{4.2}) == std::vector<double>{0.0});
  CHECK(rank_losses(std::vector<double>{0.3, 0.3}) == std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(rank_losses(std::vector<double>{0.1, NAN}), DataError);
  CHECK_THROWS_AS(rank_losses(std::vector<double>{}), DataError);
}

TEST_CASE("policy_lambda endpoints, symmetry and quadrature oracle") {
  const AugmentationPolicy pol;
  CHECK(policy_lambda(0.0, pol) == 1.0);
  CHECK(policy_lambda(1.0, pol) == 0.0);
  CHECK(std::abs(policy_lambda(0.5, pol) - 0.5) <= 1e-9);
  for (double r : {0.05, 0.25, 0.4, 0.7, 0.9}) {
    const double expect = 1.0 - oracle::incomplete_beta_quadrature(r, 5.0, 5.0);
    CHECK(std::abs(policy_lambda(r, pol) - expect) <= 1e-6);
    CHECK(std::abs(policy_lambda(r, pol) + policy_lambda(1.0 - r, pol) - 1.0) <= 1e-12);
  }
  AugmentationPolicy skew;
  skew.a = 0.3;
  skew.s = 4.0;
  CHECK(std::abs(policy_lambda(0.6, skew) - (1.0 - oracle::incomplete_beta_quadrature(0.6, 1.2, 2.8))) <= 1e-5);
}

TEST_CASE("policy_lambda is strictly decreasing") {
  const AugmentationPolicy pol;
  for (int i = 0; i < 100; ++i) {
    CHECK(policy_lambda(i / 100.0, pol) > policy_lambda((i + 1) / 100.0, pol));
  }
}

TEST_CASE("execution probability") {
  const AugmentationPolicy pol;
  CHECK(execution_probability(0.0, pol) == doctest::Approx(0.10));
  CHECK(execution_probability(1.0, pol) == doctest::Approx(0.25));
  CHECK(execution_probability(0.5, pol) == doctest::Approx(0.175));
}

TEST_CASE("empirical execution frequency tracks p") {
  Rng rng(2024);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (double p : {0.10, 0.175, 0.25}) {
    int hits = 0;
    for (int i = 0; i < 10000; ++i) hits += coin(rng) < p ? 1 : 0;
    CHECK(std::abs(hits / 10000.0 - p) <= 0.02);
  }
}

TEST_CASE("cutmix") {
  Rng rng(1);
  const AugmentationPolicy pol;
  const auto a = random_image(rng);
  const auto b = random_image(rng);
  const LabelVector ya{1.0, 0.0};
  const LabelVector yb{0.0, 1.0};

  SUBCASE("lambda 0 is a no-op") {
    const Mixed m = cutmix(a, b, ya, yb, 0.0, pol, rng);
    CHECK(m.image == a);
    CHECK(m.label == ya);
  }

  SUBCASE("lambda 1 pastes a 56 px square and mixes by area") {
    const Mixed m = cutmix(a, b, ya, yb, 1.0, pol, rng);
    CHECK(m.label[0] == doctest::Approx(0.9375).epsilon(1e-12));
    CHECK(m.label[1] == doctest::Approx(0.0625).epsilon(1e-12));
    std::size_t from_b = 0;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 224; ++y) {
        for (int x = 0; x < 224; ++x) {
          const double v = m.image.at(c, y, x);
          REQUIRE((v == a.at(c, y, x) || v == b.at(c, y, x)));
          if (v == b.at(c, y, x) && v != a.at(c, y, x)) ++from_b;
        }
      }
    }
    CHECK(from_b == 3u * 56 * 56);
  }

  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(cutmix(a, random_image(rng, 100), ya, yb, 0.5, pol, rng), InvariantError);
  }
}

TEST_CASE("spec_augment") {
  Rng rng(7);
  const AugmentationPolicy pol;
  const auto img = random_image(rng);

  CHECK(spec_augment(img, 0.0, pol, rng) == img);

  const auto out = spec_augment(img, 1.0, pol, rng);
  CHECK(changed(img, out) == 67u * 224 + 67u * 224 - 67u * 67);

  // Exactly one full-height and one full-width band; each filled with the mean.
  int full_cols = 0;
  for (int x = 0; x < 224; ++x) {
    bool all = true;
    for (int y = 0; y < 224 && all; ++y) all = out.at(0, y, x) != img.at(0, y, x);
    full_cols += all ? 1 : 0;
  }
  CHECK(full_cols == 67);
  double mean = 0.0;
  for (std::size_t i = 0; i < img.plane(); ++i) mean += img.values[i];
  mean /= static_cast<double>(img.plane());
  for (std::size_t i = 0; i < img.plane(); ++i) {
    if (out.values[i] != img.values[i]) REQUIRE(out.values[i] == mean);
  }

  for (double lambda : {0.1, 0.33, 0.8}) {
    const int m = static_cast<int>(std::lround(lambda * 67));
    CHECK(changed(img, spec_augment(img, lambda, pol, rng)) ==
          static_cast<std::size_t>(2 * 224 * m - m * m));
  }
}

TEST_CASE("augment_batch") {
  Rng data_rng(3);
  std::vector<ImageTensor> images;
  std::vector<LabelVector> labels;
  for (int i = 0; i < 6; ++i) {
    images.push_back(random_image(data_rng, 32));
    labels.push_back(one_hot(i % 3, 3));
  }
  const std::vector<double> losses{0.4, 0.1, 2.0, 0.8, 0.3, 1.1};

  SUBCASE("both augmentations disabled is identity") {
    AugmentationPolicy off;
    off.cutmix = false;
    off.spec_augment = false;
    Rng rng(1);
    const auto out = augment_batch(images, labels, losses, off, rng);
    CHECK(out.images == images);
    CHECK(out.labels == labels);
  }

  SUBCASE("seed determinism") {
    AugmentationPolicy pol;
    pol.cutmix_max_px = 16;
    pol.specaug_max_px = 16;
    pol.p_min = pol.p_max = 0.6;
    Rng r1(99), r2(99);
    const auto a = augment_batch(images, labels, losses, pol, r1);
    const auto b = augment_batch(images, labels, losses, pol, r2);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    Rng r3(99);
    CHECK(augment_batch(images, labels, {}, pol, r3).images.size() == 6);
  }

  SUBCASE("forced p = 1, lambda = 1 changes every image and keeps labels on the simplex") {
    AugmentationPolicy pol;
    pol.cutmix_max_px = 16;
    pol.specaug_max_px = 16;
    pol.p_min = pol.p_max = 1.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const std::vector<double> ones(6, 1.0);
      const auto out = augment_batch_with_lambdas(images, labels, ones, pol, rng);
      for (std::size_t i = 0; i < 6; ++i) {
        CHECK_FALSE(out.images[i] == images[i]);
        CHECK(std::abs(sum(out.labels[i]) - 1.0) <= 1e-9);
        CHECK(std::all_of(out.labels[i].begin(), out.labels[i].end(), [](double v) { return v >= 0.0; }));
      }
    }
  }

  SUBCASE("loss count mismatch") {
    Rng rng(1);
    CHECK_THROWS_AS(augment_batch(images, labels, std::vector<double>{1.0}, AugmentationPolicy{}, rng),
                    InvariantError);
  }
}
