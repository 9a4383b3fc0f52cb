#include "dslite/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "dslite/csv.hpp"
#include "dslite/error.hpp"

namespace dslite {

namespace {

void check(const PredictionSet& p) {
  if (p.items.empty()) throw DataError("prediction set is empty");
  if (p.classes < 1) throw DataError("prediction set has no classes");
  for (const auto& it : p.items) {
    if (it.truth < 0 || it.truth >= p.classes || it.predicted < 0 || it.predicted >= p.classes) {
      throw DataError("label index outside [0, " + std::to_string(p.classes) + ") for item '" + it.item + "'");
    }
  }
}

// Mean recall from per-class (correct, total) tallies.
double uar_from(const std::vector<std::size_t>& correct, const std::vector<std::size_t>& total) {
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < total.size(); ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return sum / present;
}

}  // namespace

Confusion confusion_matrix(const PredictionSet& p) {
  check(p);
  const auto c = static_cast<std::size_t>(p.classes);
  Confusion m(c, std::vector<std::size_t>(c, 0));
  for (const auto& it : p.items) ++m[static_cast<std::size_t>(it.truth)][static_cast<std::size_t>(it.predicted)];
  return m;
}

std::vector<double> class_recalls(const PredictionSet& p) {
  const Confusion m = confusion_matrix(p);
  std::vector<double> r(m.size(), std::nan(""));
  for (std::size_t c = 0; c < m.size(); ++c) {
    std::size_t total = 0;
    for (std::size_t v : m[c]) total += v;
    if (total > 0) r[c] = static_cast<double>(m[c][c]) / static_cast<double>(total);
  }
  return r;
}

double uar(const PredictionSet& p) {
  check(p);
  const auto c = static_cast<std::size_t>(p.classes);
  std::vector<std::size_t> correct(c, 0), total(c, 0);
  for (const auto& it : p.items) {
    ++total[static_cast<std::size_t>(it.truth)];
    if (it.truth == it.predicted) ++correct[static_cast<std::size_t>(it.truth)];
  }
  return uar_from(correct, total);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvariantError("quantile of an empty sample");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(const PredictionSet& p, int n_resamples, double level, std::uint64_t seed) {
  check(p);
  if (n_resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  const std::size_t n = p.items.size();
  const auto c = static_cast<std::size_t>(p.classes);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_resamples));
  std::vector<std::size_t> correct(c), total(c);
  for (int b = 0; b < n_resamples; ++b) {
    std::fill(correct.begin(), correct.end(), 0);
    std::fill(total.begin(), total.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      const Prediction& it = p.items[pick(rng)];
      ++total[static_cast<std::size_t>(it.truth)];
      if (it.truth == it.predicted) ++correct[static_cast<std::size_t>(it.truth)];
    }
    stats.push_back(uar_from(correct, total));
  }
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

EvalReport evaluate(const PredictionSet& p, int n_resamples, double level, std::uint64_t seed) {
  EvalReport r;
  r.uar = uar(p);
  const Interval ci = bootstrap_ci(p, n_resamples, level, seed);
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  r.n_bootstrap = n_resamples;
  r.confidence = level;
  r.seed = seed;
  r.items = p.items.size();
  r.recalls = class_recalls(p);
  r.confusion = confusion_matrix(p);
  return r;
}

namespace {

std::string label_of(const std::vector<std::string>& labels, std::size_t c) {
  return c < labels.size() ? labels[c] : "class_" + std::to_string(c);
}

}  // namespace

std::string report_text(const EvalReport& r, const std::vector<std::string>& labels) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "items        " << r.items << "\n";
  os << "UAR          " << r.uar << "\n";
  os << "CI           [" << r.ci_low << ", " << r.ci_high << "]  (" << std::setprecision(1)
     << r.confidence * 100.0 << "%, " << r.n_bootstrap << " bootstrap resamples, seed " << r.seed << ")\n";
  os << std::setprecision(4) << "recall per class\n";
  for (std::size_t c = 0; c < r.recalls.size(); ++c) {
    os << "  " << std::left << std::setw(16) << label_of(labels, c) << std::right;
    if (std::isnan(r.recalls[c])) {
      os << "n/a\n";
    } else {
      os << r.recalls[c] << "\n";
    }
  }
  os << "confusion (rows = truth, columns = prediction)\n";
  for (const auto& row : r.confusion) {
    os << " ";
    for (std::size_t v : row) os << ' ' << std::setw(6) << v;
    os << "\n";
  }
  return os.str();
}

std::string report_json(const EvalReport& r, const std::vector<std::string>& labels) {
  nlohmann::ordered_json j;
  j["uar"] = r.uar;
  j["ci_low"] = r.ci_low;
  j["ci_high"] = r.ci_high;
  j["n_bootstrap"] = r.n_bootstrap;
  j["confidence"] = r.confidence;
  j["seed"] = r.seed;
  j["items"] = r.items;
  auto recalls = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < r.recalls.size(); ++c) {
    recalls[label_of(labels, c)] = std::isnan(r.recalls[c]) ? nlohmann::ordered_json() : nlohmann::ordered_json(r.recalls[c]);
  }
  j["recalls"] = recalls;
  j["confusion"] = r.confusion;
  return j.dump(2) + "\n";
}

void write_predictions_csv(const std::string& path, const PredictionSet& p) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "item_id,true,pred";
  for (int c = 0; c < p.classes; ++c) out << ",prob_" << c;
  out << "\n" << std::setprecision(17);
  for (const auto& it : p.items) {
    out << csv::quote(it.item) << ',' << it.truth << ',' << it.predicted;
    for (int c = 0; c < p.classes; ++c) {
      out << ',';
      if (static_cast<std::size_t>(c) < it.probs.size()) out << it.probs[static_cast<std::size_t>(c)];
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

PredictionSet read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty predictions file");
  const auto header = csv::split(line);
  if (header.size() < 3 || header[0] != "item_id" || header[1] != "true" || header[2] != "pred") {
    throw DataError(path + ":1: expected header item_id,true,pred[,prob_0..]");
  }
  PredictionSet p;
  p.classes = static_cast<int>(header.size()) - 3;
  int max_label = -1;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size()) throw DataError(path + ":" + std::to_string(lineno) + ": wrong field count");
    Prediction pr;
    pr.item = f[0];
    try {
      pr.truth = std::stoi(f[1]);
      pr.predicted = std::stoi(f[2]);
      for (std::size_t k = 3; k < f.size(); ++k) {
        if (!f[k].empty()) pr.probs.push_back(std::stod(f[k]));
      }
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
    max_label = std::max({max_label, pr.truth, pr.predicted});
    p.items.push_back(std::move(pr));
  }
  if (p.classes == 0) p.classes = max_label + 1;
  return p;
}

}  // namespace dslite
