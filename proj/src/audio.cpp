#include "dslite/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dslite/error.hpp"

namespace dslite {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path.string());
  }

  FmtChunk fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::size_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw DataError("truncated fmt chunk: " + path.string());
      const std::uint8_t* f = bytes.data() + body;
      fmt.format = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.bits = read_u16(f + 14);
      if (fmt.format == kFormatExtensible && avail >= 26) fmt.format = read_u16(f + 24);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1U);
  }

  if (!have_fmt || data == nullptr) throw DataError("missing fmt or data chunk: " + path.string());
  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !f32) {
    throw DataError("unsupported codec (format " + std::to_string(fmt.format) + ", " +
                    std::to_string(fmt.bits) + " bit): " + path.string());
  }
  if (fmt.sample_rate != static_cast<std::uint32_t>(kSampleRateHz)) {
    throw DataError("unsupported sample rate " + std::to_string(fmt.sample_rate) +
                    " Hz (expected 16000): " + path.string());
  }
  if (fmt.channels == 0) throw DataError("zero channels: " + path.string());

  const std::size_t frame_bytes = static_cast<std::size_t>(fmt.channels) * (fmt.bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw DataError("empty audio: " + path.string());

  AudioBuffer buf;
  buf.sample_rate_hz = kSampleRateHz;
  buf.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* p = data + i * frame_bytes;
    double v;
    if (pcm16) {
      v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    } else {
      v = std::bit_cast<float>(read_u32(p));
    }
    if (!std::isfinite(v)) throw DataError("non-finite sample in " + path.string());
    buf.samples[i] = v;
  }
  return buf;
}

void save_wav(const std::filesystem::path& path, std::span<const double> samples,
              int sample_rate_hz, WavFormat format) {
  save_wav(path, std::vector<std::vector<double>>{{samples.begin(), samples.end()}},
           sample_rate_hz, format);
}

void save_wav(const std::filesystem::path& path,
              const std::vector<std::vector<double>>& channels, int sample_rate_hz,
              WavFormat format) {
  if (channels.empty()) throw DataError("save_wav: no channels");
  const std::size_t frames = channels.front().size();
  for (const auto& ch : channels) {
    if (ch.size() != frames) throw DataError("save_wav: channel length mismatch");
  }
  const std::uint16_t n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * n_ch * (bits / 8));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, n_ch);
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * n_ch * (bits / 8));
  put_u16(out, static_cast<std::uint16_t>(n_ch * (bits / 8)));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : channels) {
      if (format == WavFormat::kPcm16) {
        const double v = std::clamp(ch[i], -1.0, 1.0) * 32768.0;
        const auto q = static_cast<std::int16_t>(std::clamp(std::lround(v), -32768L, 32767L));
        put_u16(out, static_cast<std::uint16_t>(q));
      } else {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(ch[i])));
      }
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write audio file: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("write failed: " + path.string());
}

std::size_t samples_for(double seconds, int sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
}

std::vector<Chunk> chunk_signal(const AudioBuffer& buf, double chunk_len_s, double hop_s) {
  if (!(chunk_len_s > 0.0) || !(hop_s > 0.0)) {
    throw ConfigError("chunk length and hop must be positive");
  }
  if (buf.samples.empty()) throw DataError("cannot chunk an empty audio buffer");
  const std::size_t len = samples_for(chunk_len_s, buf.sample_rate_hz);
  const std::size_t hop = samples_for(hop_s, buf.sample_rate_hz);
  if (len == 0 || hop == 0) throw ConfigError("chunk length and hop must span at least one sample");

  const std::size_t n = buf.samples.size();
  const std::size_t count = n <= len ? 1 : 1 + (n - len + hop - 1) / hop;

  std::vector<Chunk> chunks;
  chunks.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * hop;
    Chunk c;
    c.samples.assign(len, 0.0);
    const std::size_t take = std::min(len, n - start);
    std::copy_n(buf.samples.begin() + static_cast<std::ptrdiff_t>(start), take, c.samples.begin());
    c.start_s = static_cast<double>(start) / buf.sample_rate_hz;
    c.length_s = static_cast<double>(len) / buf.sample_rate_hz;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

Chunk normalize_signal(Chunk c) {
  double peak = 0.0;
  for (double v : c.samples) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return c;
  for (double& v : c.samples) v /= peak;
  return c;
}

}  // namespace dslite
