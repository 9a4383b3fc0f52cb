#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dslite/augment.hpp"
#include "dslite/nn/model.hpp"

namespace dslite::nn {

// Defaults follow the CCS column of the hyperparameter table.
struct TrainConfig {
  int batch_size = 32;
  double initial_lr = 0.001;
  int epochs_phase1 = 40;
  int epochs_phase2 = 200;
  int finetune_layers = 298;
  double dropout_rate = 0.25;
  int classifier_units = 512;
  double chunk_len_s = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// One rendered chunk with its target. `item` identifies the source file, so
// chunk predictions can be pooled per file.
struct Sample {
  ImageTensor image;
  int label = 0;
  std::string item;
};

struct HistoryRow {
  int epoch = 0;  // 1-based, counted across both phases
  int phase = 1;
  double lr = 0.0;
  double mean_loss = 0.0;
  double dev_uar = 0.0;  // NaN without a dev set
};

// Update state for one parameter vector: E[g^2] and E[dx^2].
void adadelta_update(std::span<double> w, std::span<const double> g, std::span<double> eg2,
                     std::span<double> edx2, double rho, double epsilon, double lr);

class AdaDelta {
 public:
  explicit AdaDelta(double lr = 1.0, double rho = 0.95, double epsilon = 1e-7);

  // Applies one step to every parameter with a gradient, then re-applies
  // layer constraints. Throws InvariantError on a non-finite gradient, before
  // touching any parameter.
  void step(Model& m, const Gradients& g);
  void reset();

  double lr;
  double rho;
  double epsilon;
  // [layer][trainable param][element]
  std::vector<std::vector<std::vector<double>>> eg2, edx2;
};

// Mean-probability file-level UAR over chunk samples.
double file_level_uar(const Model& m, std::span<const Sample> data, int batch_size = 32);

// Phase 1 trains the head with the extractor frozen; phase 2 unfreezes the
// last K extractor layers at a tenth of the learning rate.
std::vector<HistoryRow> train_two_phase(Model& m, std::span<const Sample> train,
                                        std::span<const Sample> dev, const TrainConfig& cfg,
                                        const AugmentationPolicy& pol, Rng& rng);

void write_history_csv(const std::string& path, std::span<const HistoryRow> rows);

}  // namespace dslite::nn
