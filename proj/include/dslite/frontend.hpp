#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "dslite/audio.hpp"
#include "dslite/image.hpp"
#include "dslite/spectrogram.hpp"

namespace dslite {

// Everything that must match between training and inference for a stored
// model to be valid.
struct PreprocessFingerprint {
  std::uint32_t sample_rate_hz = kSampleRateHz;
  std::uint32_t window_samples = kWindowSamples;
  std::uint32_t hop_samples = kHopSamples;
  std::uint32_t n_mels = kMelBins;
  std::uint32_t colormap_hash = 0;
  std::uint32_t image_height = kImageSide;
  std::uint32_t image_width = kImageSide;
  std::array<double, 3> mean = kImagenetMean;
  std::array<double, 3> std = kImagenetStd;

  bool operator==(const PreprocessFingerprint&) const = default;
  std::string describe() const;
};

struct FrontendConfig {
  int n_mels = kMelBins;
  int image_side = kImageSide;
  std::shared_ptr<const ColorMap> colormap;  // null -> viridis
};

// Intermediate products of one render, for inspection and tests.
struct RenderStages {
  Spectrogram spectrogram;
  Matrix<double> mel_power;
  Matrix<double> mel_db;
  Matrix<std::uint8_t> scaled;
  ImageTensor plot;     // colormapped, native size
  ImageTensor resized;  // raw RGB at image_side x image_side
};

// Raw audio chunk -> normalized image tensor. Immutable after construction;
// every method is const and safe to call concurrently.
class Frontend {
 public:
  explicit Frontend(FrontendConfig cfg = {});

  // normalize -> stft -> mel -> dB -> min-max -> colormap -> resize.
  ImageTensor render_raw(const Chunk& c) const;
  // render_raw followed by ImageNet normalization.
  ImageTensor render_chunk(const Chunk& c) const;
  RenderStages render_stages(const Chunk& c) const;

  const MelFilterbank& filterbank() const { return filterbank_; }
  const ColorMap& colormap() const { return *colormap_; }
  const FrontendConfig& config() const { return cfg_; }
  PreprocessFingerprint fingerprint() const;

 private:
  FrontendConfig cfg_;
  std::shared_ptr<const ColorMap> colormap_;
  MelFilterbank filterbank_;
};

// Uses a default-configured Frontend.
ImageTensor render_chunk(const Chunk& c);

}  // namespace dslite
