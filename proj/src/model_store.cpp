#include "dslite/model_store.hpp"

#include <Eigen/Core>
#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dslite/error.hpp"

namespace dslite {

std::string to_string(Precision p) { return p == Precision::kF16 ? "f16" : "f32"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f16") return Precision::kF16;
  throw ConfigError("precision must be f32 or f16, got '" + s + "'");
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(le(4))); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw DataError("truncated model archive");
  }
  std::uint64_t le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

struct Parsed {
  ArchiveInfo info;
  nn::Model model;
};

Parsed parse(const std::vector<std::uint8_t>& bytes, bool with_values) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) {
    throw DataError("bad magic: not a DSL1 model archive");
  }
  Reader r(bytes.data(), bytes.size());
  for (int i = 0; i < 4; ++i) r.u8();
  Parsed out;
  ArchiveInfo& info = out.info;
  info.version = r.u16();
  if (info.version != kArchiveVersion) {
    throw DataError("unsupported archive version " + std::to_string(info.version) + " (this build reads " +
                    std::to_string(kArchiveVersion) + ")");
  }
  if (bytes.size() < 12) throw DataError("truncated model archive");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  info.checksum = tail.u32();
  if (crc(bytes.data(), body) != info.checksum) throw ChecksumError("model archive checksum mismatch");
  info.file_bytes = bytes.size();

  const std::uint8_t prec = r.u8();
  if (prec > 1) throw DataError("unknown precision tag " + std::to_string(prec));
  info.precision = static_cast<Precision>(prec);
  r.u8();

  if (r.u8() != 1) throw DataError("model archive carries no preprocessing fingerprint");
  PreprocessFingerprint& fp = info.fingerprint;
  fp.sample_rate_hz = r.u32();
  fp.window_samples = r.u32();
  fp.hop_samples = r.u32();
  fp.n_mels = r.u32();
  fp.colormap_hash = r.u32();
  fp.image_height = r.u32();
  fp.image_width = r.u32();
  for (double& v : fp.mean) v = r.f64();
  for (double& v : fp.std) v = r.f64();

  info.config_hash = r.u32();
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw DataError("implausible input rank");
  for (std::uint32_t i = 0; i < rank; ++i) info.input_shape.push_back(static_cast<int>(r.u32()));
  info.extractor_layers = static_cast<int>(r.u32());
  const std::uint32_t n_labels = r.u32();
  for (std::uint32_t i = 0; i < n_labels; ++i) info.class_labels.push_back(r.str());

  const std::uint32_t n_layers = r.u32();
  info.layers = n_layers;
  std::vector<std::vector<std::size_t>> sizes;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    nn::LayerSpec spec;
    spec.kind = static_cast<nn::LayerKind>(r.u8());
    spec.frozen = r.u8() != 0;
    const std::int32_t concat = r.i32();
    if (concat >= 0) spec.concat_from = concat;
    const std::uint32_t n_ints = r.u32();
    for (std::uint32_t k = 0; k < n_ints; ++k) spec.ints.push_back(r.i64());
    const std::uint32_t n_reals = r.u32();
    for (std::uint32_t k = 0; k < n_reals; ++k) spec.reals.push_back(r.f64());
    auto layer = nn::make_layer(spec);
    const std::uint32_t n_params = r.u32();
    if (n_params != layer->params().size()) throw DataError("layer " + std::to_string(i) + ": parameter count mismatch");
    sizes.emplace_back();
    for (auto& p : layer->params()) {
      const std::string name = r.str();
      const bool trainable = r.u8() != 0;
      const std::uint32_t prank = r.u32();
      nn::Shape shape;
      for (std::uint32_t k = 0; k < prank; ++k) shape.push_back(static_cast<int>(r.u32()));
      const std::uint32_t count = r.u32();
      if (name != p.name || trainable != p.trainable || shape != p.shape || count != p.value.size()) {
        throw DataError("layer " + std::to_string(i) + ": parameter '" + name + "' does not match its architecture");
      }
      sizes.back().push_back(count);
      info.parameter_values += count;
    }
    info.architecture.push_back(spec);
    out.model.layers.push_back(std::move(layer));
  }

  const std::size_t width = info.precision == Precision::kF16 ? 2 : 4;
  info.blob_bytes = info.parameter_values * width;
  if (body - r.pos() != info.blob_bytes) throw DataError("parameter blob size does not match the architecture");
  if (with_values) {
    for (auto& layer : out.model.layers) {
      for (auto& p : layer->params()) {
        for (double& v : p.value) {
          if (info.precision == Precision::kF16) {
            v = static_cast<double>(static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(r.u16())));
          } else {
            v = static_cast<double>(r.f32());
          }
        }
      }
    }
  }
  nn::Model& m = out.model;
  m.extractor_layers = info.extractor_layers;
  m.input_shape = info.input_shape;
  m.class_labels = info.class_labels;
  m.fingerprint = info.fingerprint;
  m.config_hash = info.config_hash;
  if (m.extractor_layers < 0 || m.extractor_layers > m.layer_count()) throw DataError("bad extractor boundary");
  try {
    m.activation_shapes();
  } catch (const InvariantError& e) {
    throw DataError(std::string("inconsistent architecture: ") + e.what());
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model archive " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_model(const nn::Model& m, Precision precision) {
  Writer w;
  w.raw(kArchiveMagic, 4);
  w.u16(kArchiveVersion);
  w.u8(static_cast<std::uint8_t>(precision));
  w.u8(0);

  w.u8(1);
  const PreprocessFingerprint& fp = m.fingerprint;
  for (std::uint32_t v : {fp.sample_rate_hz, fp.window_samples, fp.hop_samples, fp.n_mels, fp.colormap_hash,
                          fp.image_height, fp.image_width}) {
    w.u32(v);
  }
  for (double v : fp.mean) w.f64(v);
  for (double v : fp.std) w.f64(v);

  w.u32(m.config_hash);
  w.u32(static_cast<std::uint32_t>(m.input_shape.size()));
  for (int d : m.input_shape) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(m.extractor_layers));
  w.u32(static_cast<std::uint32_t>(m.class_labels.size()));
  for (const auto& l : m.class_labels) w.str(l);

  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& layer : m.layers) {
    const nn::LayerSpec spec = layer->spec();
    w.u8(static_cast<std::uint8_t>(spec.kind));
    w.u8(spec.frozen ? 1 : 0);
    w.i32(spec.concat_from.value_or(-1));
    w.u32(static_cast<std::uint32_t>(spec.ints.size()));
    for (auto v : spec.ints) w.i64(v);
    w.u32(static_cast<std::uint32_t>(spec.reals.size()));
    for (double v : spec.reals) w.f64(v);
    w.u32(static_cast<std::uint32_t>(layer->params().size()));
    for (const auto& p : layer->params()) {
      w.str(p.name);
      w.u8(p.trainable ? 1 : 0);
      w.u32(static_cast<std::uint32_t>(p.shape.size()));
      for (int d : p.shape) w.u32(static_cast<std::uint32_t>(d));
      w.u32(static_cast<std::uint32_t>(p.value.size()));
    }
  }

  for (const auto& layer : m.layers) {
    for (const auto& p : layer->params()) {
      for (double v : p.value) {
        if (!std::isfinite(v)) throw InvariantError("refusing to save a non-finite parameter in '" + p.name + "'");
        const float f = static_cast<float>(v);
        if (precision == Precision::kF16) {
          w.u16(Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(f)));
        } else {
          w.f32(f);
        }
      }
    }
  }
  auto& bytes = w.bytes();
  w.u32(crc(bytes.data(), bytes.size()));
  return std::move(bytes);
}

nn::Model decode_model(const std::vector<std::uint8_t>& bytes) { return std::move(parse(bytes, true).model); }

void save_model(const nn::Model& m, const std::filesystem::path& path, Precision precision) {
  const auto bytes = encode_model(m, precision);
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw DataError("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

nn::Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

ArchiveInfo inspect_archive(const std::filesystem::path& path) { return parse(read_file(path), false).info; }

std::string describe_archive(const ArchiveInfo& info) {
  std::ostringstream os;
  os << "format        DSL1 v" << info.version << "\n";
  os << "precision     " << to_string(info.precision) << "\n";
  os << "file bytes    " << info.file_bytes << "\n";
  os << "blob bytes    " << info.blob_bytes << " (" << info.parameter_values << " values)\n";
  os << "checksum      0x" << std::hex << std::setw(8) << std::setfill('0') << info.checksum << std::dec
     << std::setfill(' ') << "\n";
  os << "config hash   0x" << std::hex << std::setw(8) << std::setfill('0') << info.config_hash << std::dec
     << std::setfill(' ') << "\n";
  os << "input         " << nn::to_string(info.input_shape) << "\n";
  os << "classes       ";
  for (std::size_t i = 0; i < info.class_labels.size(); ++i) os << (i ? ", " : "") << info.class_labels[i];
  os << "\n";
  os << "preprocessing " << info.fingerprint.describe() << "\n";
  os << "layers        " << info.layers << " (extractor " << info.extractor_layers << ")\n";
  for (std::size_t i = 0; i < info.architecture.size(); ++i) {
    const auto& s = info.architecture[i];
    os << "  " << std::setw(3) << i << "  " << std::left << std::setw(16) << nn::to_string(s.kind) << std::right;
    for (auto v : s.ints) os << ' ' << v;
    for (double v : s.reals) os << ' ' << v;
    if (s.concat_from) os << "  concat<-" << *s.concat_from;
    if (s.frozen) os << "  frozen";
    os << "\n";
  }
  return os.str();
}

std::uintmax_t model_size(const std::filesystem::path& path) {
  std::error_code ec;
  const auto n = std::filesystem::file_size(path, ec);
  if (ec) throw DataError("cannot stat " + path.string() + ": " + ec.message());
  return n;
}

double compression_factor(const std::filesystem::path& f32_path, const std::filesystem::path& f16_path) {
  return static_cast<double>(model_size(f32_path)) / static_cast<double>(model_size(f16_path));
}

}  // namespace dslite
