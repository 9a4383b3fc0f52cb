#include "dslite/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "dslite/error.hpp"
#include "dslite/eval.hpp"
#include "dslite/nn/predict.hpp"

namespace dslite::nn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
  if (epochs_phase1 < 0 || epochs_phase2 < 0) throw ConfigError("epoch counts must be nonnegative");
  if (finetune_layers < 0) throw ConfigError("finetune_layers must be nonnegative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (classifier_units < 0) throw ConfigError("classifier_units must be nonnegative");
  if (!(chunk_len_s > 0.0)) throw ConfigError("chunk_len_s must be positive");
}

void adadelta_update(std::span<double> w, std::span<const double> g, std::span<double> eg2,
                     std::span<double> edx2, double rho, double epsilon, double lr) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
    const double update = std::sqrt(edx2[i] + epsilon) / std::sqrt(eg2[i] + epsilon) * g[i];
    edx2[i] = rho * edx2[i] + (1.0 - rho) * update * update;
    w[i] -= lr * update;
  }
}

AdaDelta::AdaDelta(double lr_, double rho_, double epsilon_) : lr(lr_), rho(rho_), epsilon(epsilon_) {}

void AdaDelta::reset() {
  eg2.clear();
  edx2.clear();
}

void AdaDelta::step(Model& m, const Gradients& g) {
  if (g.layers.size() != m.layers.size()) throw InvariantError("gradient set does not match the model");
  for (const auto& layer : g.layers) {
    for (const auto& pg : layer) {
      if (!std::all_of(pg.begin(), pg.end(), [](double v) { return std::isfinite(v); })) {
        throw InvariantError("non-finite gradient");
      }
    }
  }
  eg2.resize(m.layers.size());
  edx2.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (g.layers[i].empty()) continue;
    Layer& layer = *m.layers[i];
    std::size_t k = 0;
    for (Param& p : layer.params()) {
      if (!p.trainable) continue;
      if (k >= g.layers[i].size() || g.layers[i][k].size() != p.value.size()) {
        throw InvariantError("gradient shape mismatch in layer " + std::to_string(i));
      }
      if (eg2[i].size() <= k) {
        eg2[i].emplace_back(p.value.size(), 0.0);
        edx2[i].emplace_back(p.value.size(), 0.0);
      }
      adadelta_update(p.value, g.layers[i][k], eg2[i][k], edx2[i][k], rho, epsilon, lr);
      ++k;
    }
    layer.constrain();
  }
  m.touch();
}

double file_level_uar(const Model& m, std::span<const Sample> data, int batch_size) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  return uar(predict_items(m, data, batch_size));
}

namespace {

double run_epoch(Model& m, std::span<const Sample> train, const TrainConfig& cfg,
                 const AugmentationPolicy& pol, AdaDelta& opt, std::vector<double>& last_loss, Rng& rng) {
  const int classes = m.classes();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
    std::vector<ImageTensor> images;
    std::vector<LabelVector> labels;
    std::vector<double> losses;
    bool have_losses = true;
    for (std::size_t j = start; j < end; ++j) {
      images.push_back(train[order[j]].image);
      labels.push_back(one_hot(train[order[j]].label, classes));
      losses.push_back(last_loss[order[j]]);
      have_losses = have_losses && std::isfinite(last_loss[order[j]]);
    }
    if (!have_losses) losses.clear();
    AugmentedBatch batch{std::move(images), std::move(labels)};
    if (pol.any_enabled()) batch = augment_batch(batch.images, batch.labels, losses, pol, rng);

    const ForwardResult fr = m.forward(to_batch(batch.images), true, &rng);
    const Loss loss = cross_entropy(fr.probs, batch.labels);
    for (std::size_t j = start; j < end; ++j) last_loss[order[j]] = loss.per_sample[j - start];
    total += loss.mean * static_cast<double>(end - start);
    opt.step(m, m.backward(fr.cache, batch.labels));
  }
  return total / static_cast<double>(train.size());
}

}  // namespace

std::vector<HistoryRow> train_two_phase(Model& m, std::span<const Sample> train,
                                        std::span<const Sample> dev, const TrainConfig& cfg,
                                        const AugmentationPolicy& pol, Rng& rng) {
  cfg.validate();
  if (pol.any_enabled()) pol.validate(m.input_shape[1]);
  if (train.empty()) throw DataError("training set is empty");
  if (cfg.finetune_layers > m.extractor_layers) {
    throw ConfigError("finetune_layers = " + std::to_string(cfg.finetune_layers) + " exceeds the " +
                      std::to_string(m.extractor_layers) + " extractor layers");
  }
  const int classes = m.classes();
  for (const auto& s : train) {
    if (s.label < 0 || s.label >= classes) throw DataError("training label outside the class range");
  }

  std::vector<HistoryRow> history;
  std::vector<double> last_loss(train.size(), std::numeric_limits<double>::quiet_NaN());
  int epoch = 0;
  auto run_phase = [&](int phase, int epochs, double lr) {
    AdaDelta opt(lr);
    for (int e = 0; e < epochs; ++e) {
      const double mean_loss = run_epoch(m, train, cfg, pol, opt, last_loss, rng);
      history.push_back({++epoch, phase, lr, mean_loss, file_level_uar(m, dev, cfg.batch_size)});
    }
  };

  m.freeze_extractor(true);
  for (int i = m.extractor_layers; i < m.layer_count(); ++i) m.layers[static_cast<std::size_t>(i)]->frozen = false;
  run_phase(1, cfg.epochs_phase1, cfg.initial_lr);
  if (cfg.epochs_phase2 > 0) {
    m.unfreeze_last(cfg.finetune_layers);
    run_phase(2, cfg.epochs_phase2, cfg.initial_lr / 10.0);
  }
  return history;
}

void write_history_csv(const std::string& path, std::span<const HistoryRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  out << "epoch,phase,lr,mean_loss,dev_uar\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.phase << ',' << r.lr << ',' << r.mean_loss << ',';
    if (std::isfinite(r.dev_uar)) out << r.dev_uar;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace dslite::nn
