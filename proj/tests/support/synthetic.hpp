#pragma once

// Generated data: tone clips in noise and random prediction sets.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dslite/audio.hpp"
#include "dslite/dataset.hpp"
#include "dslite/eval.hpp"
#include "dslite/frontend.hpp"
#include "dslite/nn/train.hpp"

namespace dslite::test {

inline const std::vector<double>& tone_frequencies() {
  static const std::vector<double> f{400.0, 1200.0, 3000.0};
  return f;
}

inline std::string tone_label(double hz) { return "tone_" + std::to_string(static_cast<int>(hz)); }

// Sine of random amplitude and phase plus white Gaussian noise at `snr_db`.
inline AudioBuffer tone_clip(double hz, double seconds, double snr_db, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.3, 0.8), phase(0.0, 2.0 * std::numbers::pi);
  const double a = amp(rng), ph = phase(rng);
  const double noise_power = a * a / 2.0 / std::pow(10.0, snr_db / 10.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(noise_power));
  AudioBuffer b;
  b.samples.resize(samples_for(seconds, kSampleRateHz));
  for (std::size_t n = 0; n < b.samples.size(); ++n) {
    b.samples[n] = a * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(n) / kSampleRateHz + ph) + noise(rng);
  }
  return b;
}

struct CorpusSpec {
  int train_per_class = 40;
  int dev_per_class = 10;
  int test_per_class = 10;
  double seconds = 3.0;
  double snr_db = 20.0;
  std::uint64_t seed = 2024;
};

// Writes PCM16 clips plus manifest.csv under `dir`; returns the manifest path.
inline std::filesystem::path write_tone_corpus(const std::filesystem::path& dir, const CorpusSpec& spec = {}) {
  std::filesystem::create_directories(dir / "audio");
  std::mt19937_64 rng(spec.seed);
  std::vector<ManifestEntry> entries;
  const std::pair<const char*, int> parts[] = {
      {"train", spec.train_per_class}, {"dev", spec.dev_per_class}, {"test", spec.test_per_class}};
  for (const auto& [part, count] : parts) {
    for (int i = 0; i < count; ++i) {
      for (double hz : tone_frequencies()) {
        const std::string name = std::string(part) + "_" + tone_label(hz) + "_" + std::to_string(i) + ".wav";
        save_wav(dir / "audio" / name, tone_clip(hz, spec.seconds, spec.snr_db, rng).samples);
        entries.push_back({"audio/" + name, tone_label(hz), part, 0});
      }
    }
  }
  const auto manifest = dir / "manifest.csv";
  write_manifest(manifest, entries);
  return manifest;
}

// Rendered in memory, one sample per clip-chunk.
inline std::vector<nn::Sample> tone_samples(const Frontend& fe, int per_class, const std::string& tag,
                                            std::mt19937_64& rng, double seconds = 3.0, double snr_db = 20.0) {
  std::vector<nn::Sample> out;
  for (int i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < tone_frequencies().size(); ++c) {
      const AudioBuffer b = tone_clip(tone_frequencies()[c], seconds, snr_db, rng);
      const std::string item = tag + "_" + std::to_string(c) + "_" + std::to_string(i);
      for (const auto& ch : chunk_signal(b, 3.0, 3.0)) out.push_back({fe.render_chunk(ch), static_cast<int>(c), item});
    }
  }
  return out;
}

// Balanced truth; each prediction is correct with probability `p_correct`,
// otherwise a uniformly drawn wrong class.
inline PredictionSet random_predictions(std::size_t n, int classes, double p_correct, std::mt19937_64& rng) {
  PredictionSet p;
  p.classes = classes;
  std::bernoulli_distribution hit(p_correct);
  std::uniform_int_distribution<int> other(1, classes - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int truth = static_cast<int>(i % static_cast<std::size_t>(classes));
    const int pred = hit(rng) ? truth : (truth + other(rng)) % classes;
    p.items.push_back({"item" + std::to_string(i), truth, pred, {}});
  }
  return p;
}

}  // namespace dslite::test
