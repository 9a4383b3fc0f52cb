#pragma once

// Flat `key = value` run configuration. Values are typed: integers, reals,
// `true`/`false`, or double-quoted strings. `#` starts a comment.

#include <filesystem>
#include <string>
#include <vector>

#include "dslite/augment.hpp"
#include "dslite/nn/model.hpp"
#include "dslite/nn/train.hpp"

namespace dslite {

struct RunConfig {
  std::string manifest;
  std::string out = "out";
  nn::TrainConfig train;
  nn::ArchSpec arch;
  AugmentationPolicy augment;
  int n_bootstrap = 1000;
  double confidence = 0.95;
  std::uint64_t bootstrap_seed = 0;
  double hop_s = 1.0;
  std::string precision = "f32";

  // Range checks across all sections; throws ConfigError.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Every key with its current value, grouped by section; reloads to an equal
// RunConfig.
std::string dump_config(const RunConfig& cfg);

// Starts from `base` and applies each assignment. Errors name `source` and
// the line.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>", RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

std::vector<std::string> config_keys();

// CRC32 of the dump; stored in archives trained from this config.
std::uint32_t config_hash(const RunConfig& cfg);

}  // namespace dslite
