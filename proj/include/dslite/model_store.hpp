#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dslite/nn/model.hpp"

namespace dslite {

enum class Precision : std::uint8_t { kF32 = 0, kF16 = 1 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);  // "f32" | "f16"

inline constexpr char kArchiveMagic[4] = {'D', 'S', 'L', '1'};
inline constexpr std::uint16_t kArchiveVersion = 1;

// In-memory encoding; byte-identical for identical models on any platform.
std::vector<std::uint8_t> encode_model(const nn::Model& m, Precision precision);
nn::Model decode_model(const std::vector<std::uint8_t>& bytes);

// Writes through a temporary file, so a failed save leaves no archive behind.
void save_model(const nn::Model& m, const std::filesystem::path& path, Precision precision);
nn::Model load_model(const std::filesystem::path& path);

struct ArchiveInfo {
  std::uint16_t version = 0;
  Precision precision = Precision::kF32;
  std::size_t file_bytes = 0;
  std::size_t blob_bytes = 0;
  std::size_t parameter_values = 0;  // including non-trainable buffers
  std::size_t layers = 0;
  int extractor_layers = 0;
  std::uint32_t checksum = 0;
  std::uint32_t config_hash = 0;
  nn::Shape input_shape;
  std::vector<std::string> class_labels;
  PreprocessFingerprint fingerprint;
  std::vector<nn::LayerSpec> architecture;
};

ArchiveInfo inspect_archive(const std::filesystem::path& path);
std::string describe_archive(const ArchiveInfo& info);

std::uintmax_t model_size(const std::filesystem::path& path);
double compression_factor(const std::filesystem::path& f32_path, const std::filesystem::path& f16_path);

}  // namespace dslite
