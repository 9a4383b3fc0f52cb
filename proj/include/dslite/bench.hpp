#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dslite/nn/model.hpp"

namespace dslite {

inline constexpr int kBenchReps = 50;
inline constexpr int kBenchWarmup = 5;

struct Timing {
  double mean_ms = 0.0;
  // Sample standard deviation; 0 for a single repetition.
  double std_ms = 0.0;
  int repetitions = 0;
  std::vector<double> samples_ms;
};

Timing summarize_timings(std::vector<double> samples_ms);

// Runs `stage` warmup + reps times, one at a time, and keeps the last reps.
Timing time_stage(const std::function<void()>& stage, int reps = kBenchReps, int warmup = kBenchWarmup);

// Peak bytes allocated above the starting live total during one call, or
// nullopt when the allocation hook is not linked into this process.
std::optional<std::size_t> measure_memory(const std::function<void()>& stage);

// 2 FLOPs per multiply-accumulate; per sample.
std::uint64_t count_flops(const nn::Model& m, const nn::Shape& input);
std::uint64_t count_flops(const nn::Model& m);
// All stored values, batch-norm running statistics included.
std::uint64_t count_params(const nn::Model& m);

struct BenchRow {
  std::string stage;
  Timing timing;
  std::optional<std::size_t> peak_memory_bytes;
  std::optional<std::uint64_t> flops;
  std::optional<std::uint64_t> params;
  std::optional<std::uintmax_t> artifact_bytes;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  int warmup = kBenchWarmup;
  std::string archive;
  std::string fixture;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  std::uintmax_t model_bytes = 0;
};

// Rows "preprocessing" (render of the first fixture chunk) and "inference"
// (single-image forward pass).
BenchReport bench_pipeline(const std::string& archive, const std::string& fixture, int reps = kBenchReps,
                           int warmup = kBenchWarmup, double chunk_len_s = 3.0);

std::string bench_text(const BenchReport& r);
std::string bench_json(const BenchReport& r);

}  // namespace dslite
