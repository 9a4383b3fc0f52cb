#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dslite/matrix.hpp"

namespace dslite {

inline constexpr int kImageSide = 224;
inline constexpr std::array<double, 3> kImagenetMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImagenetStd{0.229, 0.224, 0.225};

enum class ImageStage { kRawRgb, kNormalized };

// Planar RGB: values[c * height * width + y * width + x].
struct ImageTensor {
  int height = 0;
  int width = 0;
  ImageStage stage = ImageStage::kRawRgb;
  std::vector<double> values;

  static constexpr int channels = 3;

  ImageTensor() = default;
  ImageTensor(int h, int w, ImageStage s, double fill = 0.0)
      : height(h), width(w), stage(s), values(static_cast<std::size_t>(3 * h * w), fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) {
    return values[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
  }
  double at(int c, int y, int x) const {
    return values[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const ImageTensor&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;

class ColorMap {
 public:
  ColorMap(std::string name, const std::array<Rgb, 256>& table);

  // The shipped viridis table (data/viridis.csv, compiled in).
  static const ColorMap& viridis();
  // 256 rows of "r,g,b" integers in [0, 255].
  static ColorMap from_csv(const std::filesystem::path& path, std::string name = "custom");
  static ColorMap parse_csv(const std::string& text, std::string name);

  const std::string& name() const { return name_; }
  const Rgb& operator[](std::uint8_t v) const { return table_[v]; }
  const std::array<Rgb, 256>& table() const { return table_; }
  // CRC32 over the 768 table bytes; part of the preprocessing fingerprint.
  std::uint32_t hash() const;

 private:
  std::string name_;
  std::array<Rgb, 256> table_;
};

// Input is frames x mel bins. Output height = mel bins with the lowest bin in
// the bottom row, width = frames.
ImageTensor apply_colormap(const Matrix<std::uint8_t>& scaled, const ColorMap& cm);

// Bilinear resampling with half-pixel centers and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& img, int out_height = kImageSide,
                            int out_width = kImageSide);

// (v / 255 - mean) / std per channel. Throws InvariantError on a stage mismatch.
ImageTensor imagenet_normalize(const ImageTensor& img);
ImageTensor imagenet_denormalize(const ImageTensor& img);

// 8-bit RGB PNG; values are rounded and clamped to [0, 255].
void export_png(const ImageTensor& img, const std::filesystem::path& path);
ImageTensor read_png(const std::filesystem::path& path);

}  // namespace dslite
