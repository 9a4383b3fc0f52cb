#pragma once

#include <cstdint>
#include <vector>

#include "dslite/audio.hpp"
#include "dslite/matrix.hpp"

namespace dslite {

// 32 ms Hann window at 16 kHz with 50 % overlap.
inline constexpr int kWindowSamples = 512;
inline constexpr int kHopSamples = 256;
inline constexpr int kFftSize = 512;
inline constexpr int kMelBins = 128;
inline constexpr double kDbFloor = -80.0;
inline constexpr double kPowerEpsilon = 1e-10;

struct Spectrogram {
  Matrix<double> power;  // frames x (fft_size / 2 + 1)
  int frame_hop_samples = kHopSamples;
  int fft_size = kFftSize;

  std::size_t frames() const { return power.rows; }
  std::size_t bins() const { return power.cols; }
};

struct MelFilterbank {
  Matrix<double> weights;  // n_mels x bins
  int n_mels = kMelBins;
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;
  std::vector<double> center_hz;  // one per filter, increasing
};

// Frames of the short-time transform: floor((n - window) / hop) + 1.
std::size_t stft_frame_count(std::size_t n_samples, int window = kWindowSamples,
                             int hop = kHopSamples);

// Periodic Hann window of the given length.
std::vector<double> hann_window(int length);

// Power spectrogram |X|^2 of Hann-windowed frames (512 samples, hop 256,
// FFT 512). Throws DataError if the chunk is shorter than one window.
Spectrogram stft(const Chunk& c);
Spectrogram stft(std::span<const double> samples);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// HTK-scale triangular filters without area normalization. f_max <= 0 means
// Nyquist.
MelFilterbank build_mel_filterbank(int fft_size = kFftSize, int sample_rate_hz = kSampleRateHz,
                                   int n_mels = kMelBins, double f_min_hz = 0.0,
                                   double f_max_hz = 0.0);

// frames x n_mels
Matrix<double> apply_filterbank(const Spectrogram& spec, const MelFilterbank& fb);

// 10 log10(max(p, eps)) relative to the matrix maximum, floored at -80 dB.
Matrix<double> power_to_db(const Matrix<double>& power);

// round(255 (x - min) / (max - min)); a constant matrix maps to 0.
Matrix<std::uint8_t> minmax_scale(const Matrix<double>& db);

}  // namespace dslite
