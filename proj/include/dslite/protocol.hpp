#pragma once

#include <span>
#include <string>
#include <vector>

#include "dslite/augment.hpp"
#include "dslite/eval.hpp"
#include "dslite/nn/model.hpp"
#include "dslite/nn/train.hpp"

namespace dslite {

// One grid point; the model is initialized and trained from train.seed.
struct ProtocolConfig {
  std::string name;
  nn::ArchSpec arch;
  nn::TrainConfig train;
  AugmentationPolicy policy;
};

struct ProtocolOptions {
  int n_bootstrap = 1000;
  double level = 0.95;
  std::uint64_t bootstrap_seed = 0;
  bool fuse = true;  // retrain the selected config on train + dev before testing
};

struct ProtocolResult {
  std::vector<double> dev_uars;  // grid order
  std::size_t best = 0;
  EvalReport dev_report;   // selected config, trained on train only
  EvalReport test_report;  // final model on test
  PredictionSet test_predictions;
  nn::Model model;  // the model that produced test_report
  std::vector<nn::HistoryRow> history;
};

// Trains every grid config on train and scores dev; picks the best dev UAR
// (ties -> earliest); retrains it on train + dev when fusing; scores test.
// Throws DataError when two partitions share an item.
ProtocolResult run_protocol(std::span<const nn::Sample> train, std::span<const nn::Sample> dev,
                            std::span<const nn::Sample> test, std::span<const ProtocolConfig> grid,
                            const nn::Model& prototype_meta, const ProtocolOptions& opt = {});

// Builds and trains one config; `meta` supplies labels and fingerprint.
nn::Model train_config(const ProtocolConfig& cfg, std::span<const nn::Sample> train,
                       std::span<const nn::Sample> dev, const nn::Model& meta,
                       std::vector<nn::HistoryRow>* history = nullptr);

}  // namespace dslite
