#include "dslite/spectrogram.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "dslite/error.hpp"

namespace dslite {

namespace {

// FFTW's planner is not reentrant; plans are created once per size under a
// lock and executed with the new-array interface, which is.
fftw_plan r2c_plan(int n) {
  static std::mutex mu;
  static std::map<int, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  auto* in = fftw_alloc_real(static_cast<std::size_t>(n));
  auto* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  plans.emplace(n, p);
  return p;
}

}  // namespace

std::size_t stft_frame_count(std::size_t n_samples, int window, int hop) {
  const auto w = static_cast<std::size_t>(window);
  if (n_samples < w) return 0;
  return (n_samples - w) / static_cast<std::size_t>(hop) + 1;
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

Spectrogram stft(const Chunk& c) { return stft(c.samples); }

Spectrogram stft(std::span<const double> samples) {
  if (samples.size() < static_cast<std::size_t>(kWindowSamples)) {
    throw DataError("chunk of " + std::to_string(samples.size()) +
                    " samples is shorter than one analysis window (512)");
  }
  const std::size_t frames = stft_frame_count(samples.size());
  const std::size_t bins = kFftSize / 2 + 1;
  static const std::vector<double> window = hann_window(kWindowSamples);

  Spectrogram spec;
  spec.power = Matrix<double>(frames, bins);
  fftw_plan plan = r2c_plan(kFftSize);

  std::vector<double> frame(kFftSize, 0.0);
  std::vector<fftw_complex> out(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t offset = t * kHopSamples;
    for (std::size_t n = 0; n < static_cast<std::size_t>(kWindowSamples); ++n) {
      frame[n] = samples[offset + n] * window[n];
    }
    fftw_execute_dft_r2c(plan, frame.data(), out.data());
    auto row = spec.power.row(t);
    for (std::size_t k = 0; k < bins; ++k) {
      row[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
  }
  return spec;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank build_mel_filterbank(int fft_size, int sample_rate_hz, int n_mels,
                                   double f_min_hz, double f_max_hz) {
  const double nyquist = sample_rate_hz / 2.0;
  if (f_max_hz <= 0.0) f_max_hz = nyquist;
  if (n_mels < 1 || fft_size < 2 || sample_rate_hz <= 0) {
    throw ConfigError("mel filterbank needs n_mels >= 1 and a positive FFT size and rate");
  }
  if (!(f_min_hz >= 0.0) || !(f_max_hz > f_min_hz) || f_max_hz > nyquist) {
    throw ConfigError("degenerate mel frequency range [" + std::to_string(f_min_hz) + ", " +
                      std::to_string(f_max_hz) + "] Hz");
  }

  const std::size_t bins = static_cast<std::size_t>(fft_size / 2 + 1);
  const double bin_hz = static_cast<double>(sample_rate_hz) / fft_size;
  const double mel_lo = hz_to_mel(f_min_hz);
  const double mel_hi = hz_to_mel(f_max_hz);

  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.f_min_hz = f_min_hz;
  fb.f_max_hz = f_max_hz;
  fb.weights = Matrix<double>(static_cast<std::size_t>(n_mels), bins);
  fb.center_hz.resize(static_cast<std::size_t>(n_mels));

  for (std::size_t m = 0; m < static_cast<std::size_t>(n_mels); ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    fb.center_hz[m] = center;
    auto row = fb.weights.row(m);
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      row[k] = w;
      any = any || w > 0.0;
    }
    // A filter narrower than the bin spacing collapses onto its nearest bin.
    if (!any) {
      const auto k = static_cast<std::size_t>(std::lround(center / bin_hz));
      row[std::min(k, bins - 1)] = 1.0;
    }
  }
  return fb;
}

Matrix<double> apply_filterbank(const Spectrogram& spec, const MelFilterbank& fb) {
  if (fb.weights.cols != spec.bins()) {
    throw InvariantError("filterbank has " + std::to_string(fb.weights.cols) +
                         " bins, spectrogram has " + std::to_string(spec.bins()));
  }
  // Each triangle is nonzero on a short run of bins; the skipped terms are
  // exact zeros, so the sums match the dense product bit for bit.
  std::vector<std::pair<std::size_t, std::size_t>> span(fb.weights.rows, {0, 0});
  for (std::size_t m = 0; m < fb.weights.rows; ++m) {
    const auto w = fb.weights.row(m);
    std::size_t lo = 0, hi = w.size();
    while (lo < hi && w[lo] == 0.0) ++lo;
    while (hi > lo && w[hi - 1] == 0.0) --hi;
    span[m] = {lo, hi};
  }
  Matrix<double> mel(spec.frames(), fb.weights.rows);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    auto p = spec.power.row(t);
    for (std::size_t m = 0; m < fb.weights.rows; ++m) {
      auto w = fb.weights.row(m);
      double acc = 0.0;
      for (std::size_t k = span[m].first; k < span[m].second; ++k) acc += w[k] * p[k];
      mel(t, m) = acc;
    }
  }
  return mel;
}

Matrix<double> power_to_db(const Matrix<double>& power) {
  Matrix<double> db(power.rows, power.cols);
  if (power.data.empty()) return db;
  const double peak = *std::max_element(power.data.begin(), power.data.end());
  const double ref = 10.0 * std::log10(std::max(peak, kPowerEpsilon));
  for (std::size_t i = 0; i < power.data.size(); ++i) {
    const double v = 10.0 * std::log10(std::max(power.data[i], kPowerEpsilon)) - ref;
    db.data[i] = std::max(v, kDbFloor);
  }
  // All-zero input sits on the epsilon floor, not at the reference.
  if (peak <= 0.0) std::fill(db.data.begin(), db.data.end(), kDbFloor);
  return db;
}

Matrix<std::uint8_t> minmax_scale(const Matrix<double>& db) {
  Matrix<std::uint8_t> out(db.rows, db.cols, 0);
  if (db.data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(db.data.begin(), db.data.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  if (!(span > 0.0)) return out;
  for (std::size_t i = 0; i < db.data.size(); ++i) {
    const double v = std::round(255.0 * (db.data[i] - lo) / span);
    out.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

}  // namespace dslite
