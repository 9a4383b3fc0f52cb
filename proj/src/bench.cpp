#include "dslite/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "dslite/alloc_stats.hpp"
#include "dslite/audio.hpp"
#include "dslite/error.hpp"
#include "dslite/frontend.hpp"
#include "dslite/model_store.hpp"
#include "dslite/nn/predict.hpp"

namespace dslite {

Timing summarize_timings(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw InvariantError("no timing samples");
  Timing t;
  t.repetitions = static_cast<int>(samples_ms.size());
  const double n = static_cast<double>(samples_ms.size());
  t.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / n;
  if (samples_ms.size() > 1) {
    double ss = 0.0;
    for (double v : samples_ms) ss += (v - t.mean_ms) * (v - t.mean_ms);
    t.std_ms = std::sqrt(ss / (n - 1.0));
  }
  t.samples_ms = std::move(samples_ms);
  return t;
}

Timing time_stage(const std::function<void()>& stage, int reps, int warmup) {
  if (reps < 1) throw ConfigError("benchmark repetitions must be positive");
  if (warmup < 0) throw ConfigError("warmup count must be nonnegative");
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) stage();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    stage();
    samples.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  return summarize_timings(std::move(samples));
}

std::optional<std::size_t> measure_memory(const std::function<void()>& stage) {
  if (!alloc_stats::installed()) return std::nullopt;
  const std::size_t base = alloc_stats::live_bytes();
  alloc_stats::reset_peak();
  stage();
  const std::size_t peak = alloc_stats::peak_bytes();
  return peak > base ? peak - base : 0;
}

std::uint64_t count_flops(const nn::Model& m, const nn::Shape& input) {
  for (int d : input) {
    if (d <= 0) throw ConfigError("FLOP count needs a static input shape, got " + nn::to_string(input));
  }
  const auto shapes = m.activation_shapes(input);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < m.layers.size(); ++i) total += m.layers[i]->flops(shapes[i]);
  return total;
}

std::uint64_t count_flops(const nn::Model& m) { return count_flops(m, m.input_shape); }

std::uint64_t count_params(const nn::Model& m) { return m.parameter_count(false); }

BenchReport bench_pipeline(const std::string& archive, const std::string& fixture, int reps, int warmup,
                           double chunk_len_s) {
  const nn::Model m = load_model(archive);
  const Frontend fe;
  nn::require_fingerprint(m, fe);
  const auto chunks = chunk_signal(load_wav(fixture), chunk_len_s, chunk_len_s);
  if (chunks.empty()) throw DataError("fixture " + fixture + " yields no chunks");
  const Chunk& chunk = chunks.front();

  BenchReport r;
  r.warmup = warmup;
  r.archive = archive;
  r.fixture = fixture;
  r.params = count_params(m);
  r.flops = count_flops(m);
  r.model_bytes = std::filesystem::file_size(archive);

  ImageTensor img = fe.render_chunk(chunk);
  auto prep = [&] { img = fe.render_chunk(chunk); };
  BenchRow pre{"preprocessing", time_stage(prep, reps, warmup), measure_memory(prep), {}, {}, {}};

  const nn::Tensor x = nn::to_batch(std::span(&img, 1));
  double sink = 0.0;
  auto infer = [&] { sink += m.forward(x, false).probs.data[0]; };
  BenchRow inf{"inference", time_stage(infer, reps, warmup), measure_memory(infer), r.flops, r.params, r.model_bytes};
  if (!std::isfinite(sink)) throw InvariantError("non-finite inference output during benchmark");

  r.rows = {std::move(pre), std::move(inf)};
  return r;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }

}  // namespace

std::string bench_text(const BenchReport& r) {
  std::ostringstream os;
  os << "archive " << r.archive << "\nfixture " << r.fixture << "\n\n";
  os << "stage          " << pad("mean [ms]", 12) << pad("std [ms]", 12) << pad("reps", 7) << pad("peak mem [MB]", 15)
     << '\n';
  for (const auto& row : r.rows) {
    std::string name = row.stage;
    name.resize(15, ' ');
    os << name << pad(fixed(row.timing.mean_ms, 3), 12) << pad(fixed(row.timing.std_ms, 3), 12)
       << pad(std::to_string(row.timing.repetitions), 7)
       << pad(row.peak_memory_bytes ? fixed(static_cast<double>(*row.peak_memory_bytes) / 1e6, 3) : "n/a", 15)
       << '\n';
  }
  os << '\n';
  os << "parameters     " << r.params << '\n';
  os << "FLOPs          " << r.flops << " (" << fixed(static_cast<double>(r.flops) / 1e9, 3) << " G, 2 per MAC)\n";
  os << "model size     " << fixed(static_cast<double>(r.model_bytes) / 1e6, 3) << " MB (" << r.model_bytes
     << " bytes)\n";
  os << "warmup runs    " << r.warmup << " discarded per stage\n";
  return os.str();
}

std::string bench_json(const BenchReport& r) {
  using nlohmann::ordered_json;
  auto opt = [](const auto& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json stages = ordered_json::array();
  for (const auto& row : r.rows) {
    stages.push_back({{"stage", row.stage},
                      {"mean_ms", row.timing.mean_ms},
                      {"std_ms", row.timing.std_ms},
                      {"repetitions", row.timing.repetitions},
                      {"peak_memory_bytes", opt(row.peak_memory_bytes)},
                      {"flops", opt(row.flops)},
                      {"params", opt(row.params)},
                      {"artifact_bytes", opt(row.artifact_bytes)}});
  }
  ordered_json j{{"archive", r.archive},   {"fixture", r.fixture}, {"warmup", r.warmup},
                 {"stages", stages},       {"params", r.params},   {"flops", r.flops},
                 {"model_bytes", r.model_bytes}};
  return j.dump(2) + "\n";
}

}  // namespace dslite
