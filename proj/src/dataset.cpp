#include "dslite/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "dslite/csv.hpp"
#include "dslite/error.hpp"

namespace dslite {

namespace fs = std::filesystem;

std::vector<std::string> Manifest::labels() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.label);
  return {s.begin(), s.end()};
}

std::vector<ManifestEntry> Manifest::partition(const std::string& name) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const ManifestEntry& e) { return e.partition == name; });
  return out;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.source = path;
  const fs::path base = path.parent_path();
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (!header) {
      if (f.size() != 3 || csv::trim(f[0]) != "path" || csv::trim(f[1]) != "label" || csv::trim(f[2]) != "partition") {
        throw DataError(where + "expected header 'path,label,partition'");
      }
      header = true;
      continue;
    }
    if (f.size() != 3) throw DataError(where + "expected 3 fields, found " + std::to_string(f.size()));
    ManifestEntry e{csv::trim(f[0]), csv::trim(f[1]), csv::trim(f[2]), lineno};
    if (e.path.empty() || e.label.empty() || e.partition.empty()) throw DataError(where + "empty field");
    if (fs::path(e.path).is_relative()) e.path = (base / e.path).lexically_normal().string();
    m.entries.push_back(std::move(e));
  }
  if (!header) throw DataError(path.string() + ": empty manifest");
  return m;
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "path,label,partition\n";
  for (const auto& e : entries) {
    out << csv::quote(e.path) << ',' << csv::quote(e.label) << ',' << csv::quote(e.partition) << "\n";
  }
  if (!out) throw DataError("write failed: " + path.string());
}

int label_index(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw DataError("unknown label '" + label + "'");
  return static_cast<int>(it - labels.begin());
}

std::vector<nn::Sample> load_samples(std::span<const ManifestEntry> entries, const std::vector<std::string>& labels,
                                     const Frontend& fe, double chunk_len_s, double hop_s) {
  std::vector<nn::Sample> out;
  for (const auto& e : entries) {
    const int label = label_index(labels, e.label);
    const AudioBuffer audio = load_wav(e.path);
    for (const auto& c : chunk_signal(audio, chunk_len_s, hop_s)) out.push_back({fe.render_chunk(c), label, e.path});
  }
  return out;
}

void require_disjoint(std::span<const std::span<const ManifestEntry>> partitions) {
  std::map<std::string, std::size_t> owner;
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    for (const auto& e : partitions[p]) {
      const std::string key = fs::path(e.path).lexically_normal().string();
      const auto [it, fresh] = owner.try_emplace(key, p);
      if (!fresh && it->second != p) {
        throw DataError("partitions overlap: '" + e.path + "' appears in more than one partition");
      }
    }
  }
}

}  // namespace dslite
