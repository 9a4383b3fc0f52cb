#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dslite/frontend.hpp"
#include "dslite/nn/train.hpp"

namespace dslite {

// One row of a `path,label,partition` manifest. `path` is resolved against the
// manifest's directory when relative.
struct ManifestEntry {
  std::string path;
  std::string label;
  std::string partition;
  int line = 0;
};

struct Manifest {
  std::filesystem::path source;
  std::vector<ManifestEntry> entries;

  // Sorted distinct labels; class index = position.
  std::vector<std::string> labels() const;
  std::vector<ManifestEntry> partition(const std::string& name) const;
};

// Throws DataError with file:line context on malformed rows.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

int label_index(const std::vector<std::string>& labels, const std::string& label);

// Renders every chunk of every listed file; Sample::item is the file path.
std::vector<nn::Sample> load_samples(std::span<const ManifestEntry> entries, const std::vector<std::string>& labels,
                                     const Frontend& fe, double chunk_len_s, double hop_s);

// Throws DataError when a file path appears in more than one of the lists.
void require_disjoint(std::span<const std::span<const ManifestEntry>> partitions);

}  // namespace dslite
