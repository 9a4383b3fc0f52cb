#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dslite {

struct Prediction {
  std::string item;
  int truth = 0;
  int predicted = 0;
  std::vector<double> probs;  // optional
};

struct PredictionSet {
  int classes = 0;
  std::vector<Prediction> items;
};

// counts[truth][predicted]
using Confusion = std::vector<std::vector<std::size_t>>;

Confusion confusion_matrix(const PredictionSet& p);

// Per-class recall; NaN for classes with no true instance.
std::vector<double> class_recalls(const PredictionSet& p);

// Mean recall over classes present in the truth. Throws DataError when empty.
double uar(const PredictionSet& p);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap over items, resampling |p| items with replacement.
Interval bootstrap_ci(const PredictionSet& p, int n_resamples = 1000, double level = 0.95,
                      std::uint64_t seed = 0);

// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

struct EvalReport {
  double uar = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_bootstrap = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  std::size_t items = 0;
  std::vector<double> recalls;
  Confusion confusion;
};

EvalReport evaluate(const PredictionSet& p, int n_resamples = 1000, double level = 0.95,
                    std::uint64_t seed = 0);

std::string report_text(const EvalReport& r, const std::vector<std::string>& labels = {});
std::string report_json(const EvalReport& r, const std::vector<std::string>& labels = {});

// CSV: item_id,true,pred,prob_0..prob_{C-1}
void write_predictions_csv(const std::string& path, const PredictionSet& p);
PredictionSet read_predictions_csv(const std::string& path);

}  // namespace dslite
