#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace dslite {

inline constexpr int kSampleRateHz = 16000;

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRateHz;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

struct Chunk {
  std::vector<double> samples;
  double start_s = 0.0;
  double length_s = 0.0;
};

enum class WavFormat { kPcm16, kFloat32 };

// Reads RIFF/WAVE (PCM16 or IEEE float32) at 16 kHz. Only the first channel
// is kept; PCM16 is scaled by 1/32768. Throws DataError on anything else.
AudioBuffer load_wav(const std::filesystem::path& path);

// Writers used for fixtures and the synthetic corpus. Samples are clipped to
// [-1, 1] for PCM16.
void save_wav(const std::filesystem::path& path, std::span<const double> samples,
              int sample_rate_hz = kSampleRateHz, WavFormat format = WavFormat::kPcm16);
void save_wav(const std::filesystem::path& path,
              const std::vector<std::vector<double>>& channels,
              int sample_rate_hz = kSampleRateHz, WavFormat format = WavFormat::kPcm16);

// Number of samples in a window of `seconds` at `sample_rate_hz`.
std::size_t samples_for(double seconds, int sample_rate_hz);

// Sliding window: chunks start at 0, hop, 2*hop, ... up to and including the
// first window that reaches the end of the signal; that window is zero-padded
// if it runs past the end. count = 1 + ceil(max(0, N - L) / H) in samples.
std::vector<Chunk> chunk_signal(const AudioBuffer& buf, double chunk_len_s, double hop_s);

// Peak normalization to +-1; all-zero chunks are returned unchanged.
Chunk normalize_signal(Chunk c);

}  // namespace dslite
