#include "dslite/protocol.hpp"

#include <set>

#include "dslite/error.hpp"
#include "dslite/nn/predict.hpp"

namespace dslite {

namespace {

void require_disjoint_items(std::span<const nn::Sample> a, std::span<const nn::Sample> b, const char* what) {
  std::set<std::string> items;
  for (const auto& s : a) items.insert(s.item);
  for (const auto& s : b) {
    if (items.count(s.item)) throw DataError(std::string("partitions overlap (") + what + "): '" + s.item + "'");
  }
}

}  // namespace

nn::Model train_config(const ProtocolConfig& cfg, std::span<const nn::Sample> train,
                       std::span<const nn::Sample> dev, const nn::Model& meta,
                       std::vector<nn::HistoryRow>* history) {
  nn::Rng rng(cfg.train.seed);
  const nn::HeadSpec head{cfg.train.classifier_units, cfg.train.dropout_rate,
                          static_cast<int>(meta.class_labels.size())};
  nn::Model m = nn::build_model(cfg.arch, head, rng);
  m.class_labels = meta.class_labels;
  m.fingerprint = meta.fingerprint;
  m.config_hash = meta.config_hash;
  auto h = nn::train_two_phase(m, train, dev, cfg.train, cfg.policy, rng);
  if (history) *history = std::move(h);
  return m;
}

ProtocolResult run_protocol(std::span<const nn::Sample> train, std::span<const nn::Sample> dev,
                            std::span<const nn::Sample> test, std::span<const ProtocolConfig> grid,
                            const nn::Model& meta, const ProtocolOptions& opt) {
  if (grid.empty()) throw ConfigError("protocol grid is empty");
  if (train.empty() || dev.empty() || test.empty()) throw DataError("protocol needs non-empty train, dev and test");
  require_disjoint_items(train, dev, "train/dev");
  require_disjoint_items(train, test, "train/test");
  require_disjoint_items(dev, test, "dev/test");

  ProtocolResult r;
  std::vector<PredictionSet> dev_preds;
  std::vector<nn::Model> models;
  std::vector<std::vector<nn::HistoryRow>> histories(grid.size());
  for (const auto& cfg : grid) {
    models.push_back(train_config(cfg, train, dev, meta, &histories[models.size()]));
    dev_preds.push_back(nn::predict_items(models.back(), dev, cfg.train.batch_size));
    r.dev_uars.push_back(uar(dev_preds.back()));
    if (r.dev_uars.back() > r.dev_uars[r.best]) r.best = r.dev_uars.size() - 1;
  }
  r.dev_report = evaluate(dev_preds[r.best], opt.n_bootstrap, opt.level, opt.bootstrap_seed);

  const ProtocolConfig& best = grid[r.best];
  if (opt.fuse) {
    std::vector<nn::Sample> fused(train.begin(), train.end());
    fused.insert(fused.end(), dev.begin(), dev.end());
    r.model = train_config(best, fused, {}, meta, &r.history);
  } else {
    r.model = std::move(models[r.best]);
    r.history = std::move(histories[r.best]);
  }
  r.test_predictions = nn::predict_items(r.model, test, best.train.batch_size);
  r.test_report = evaluate(r.test_predictions, opt.n_bootstrap, opt.level, opt.bootstrap_seed);
  return r;
}

}  // namespace dslite
