#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "dslite/audio.hpp"
#include "dslite/error.hpp"
#include "dslite/frontend.hpp"
#include "dslite/image.hpp"
#include "dslite/spectrogram.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace dslite;

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void write_raw_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t bits,
                   std::uint32_t rate, std::uint32_t data_bytes) {
  std::ofstream os(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
  os.write("RIFF", 4);
  u32(36 + data_bytes);
  os.write("WAVEfmt ", 8);
  u32(16);
  u16(format);
  u16(1);
  u32(rate);
  u32(rate * bits / 8);
  u16(bits / 8);
  u16(bits);
  os.write("data", 4);
  u32(data_bytes);
  for (std::uint32_t i = 0; i < data_bytes; ++i) os.put(0);
}

}  // namespace

TEST_SUITE("wav") {
  TEST_CASE("constant PCM16 scales by 1/32768") {
    test::TempDir dir;
    const auto p = dir.path() / "half.wav";
    save_wav(p, std::vector<double>(16000, 16384.0 / 32768.0));
    const AudioBuffer buf = load_wav(p);
    CHECK(buf.sample_rate_hz == 16000);
    REQUIRE(buf.samples.size() == 16000);
    CHECK(std::all_of(buf.samples.begin(), buf.samples.end(), [](double v) { return v == 0.5; }));
  }

  TEST_CASE("stereo keeps channel 0 only") {
    test::TempDir dir;
    const auto p = dir.path() / "stereo.wav";
    save_wav(p, {std::vector<double>(800, 0.25), std::vector<double>(800, -0.75)});
    const AudioBuffer buf = load_wav(p);
    REQUIRE(buf.samples.size() == 800);
    CHECK(buf.samples.front() == 0.25);
    CHECK(buf.samples.back() == 0.25);
  }

  TEST_CASE("float32 files load unscaled") {
    test::TempDir dir;
    const auto p = dir.path() / "f32.wav";
    save_wav(p, std::vector<double>{0.125, -0.5, 0.75}, 16000, WavFormat::kFloat32);
    const AudioBuffer buf = load_wav(p);
    CHECK(buf.samples == std::vector<double>{0.125, -0.5, 0.75});
  }

  TEST_CASE("rejects other sample rates, codecs and empty audio") {
    test::TempDir dir;
    save_wav(dir.path() / "cd.wav", std::vector<double>(441, 0.1), 44100);
    CHECK_THROWS_WITH_AS(load_wav(dir.path() / "cd.wav"),
                         doctest::Contains("unsupported sample rate"), DataError);
    write_raw_wav(dir.path() / "u8.wav", 1, 8, 16000, 100);
    CHECK_THROWS_WITH_AS(load_wav(dir.path() / "u8.wav"), doctest::Contains("unsupported codec"),
                         DataError);
    write_raw_wav(dir.path() / "empty.wav", 1, 16, 16000, 0);
    CHECK_THROWS_WITH_AS(load_wav(dir.path() / "empty.wav"), doctest::Contains("empty audio"),
                         DataError);
    CHECK_THROWS_AS(load_wav(dir.path() / "missing.wav"), DataError);
  }
}

TEST_SUITE("chunking") {
  AudioBuffer seconds(double s, double value = 1.0) {
    AudioBuffer b;
    b.samples.assign(samples_for(s, 16000), value);
    return b;
  }

  TEST_CASE("7 s at 3 s windows gives 3 chunks, last padded by 2 s") {
    const auto chunks = chunk_signal(seconds(7.0), 3.0, 3.0);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[2].start_s == doctest::Approx(6.0));
    const auto& last = chunks[2].samples;
    REQUIRE(last.size() == 48000);
    CHECK(std::count(last.begin(), last.end(), 1.0) == 16000);
    CHECK(std::count(last.begin(), last.end(), 0.0) == 32000);
    for (const auto& c : chunks) CHECK(c.length_s == 3.0);
  }

  TEST_CASE("exact-length audio gives one unpadded chunk") {
    const auto chunks = chunk_signal(seconds(3.0), 3.0, 3.0);
    REQUIRE(chunks.size() == 1);
    CHECK(std::count(chunks[0].samples.begin(), chunks[0].samples.end(), 1.0) == 48000);
  }

  TEST_CASE("10 s at 3 s windows and 1 s hop gives 8 windows") {
    const auto chunks = chunk_signal(seconds(10.0), 3.0, 1.0);
    REQUIRE(chunks.size() == 8);
    CHECK(chunks.back().start_s == doctest::Approx(7.0));
  }

  TEST_CASE("short audio still yields one chunk; IEMOCAP-style 4 s windows") {
    CHECK(chunk_signal(seconds(0.5), 3.0, 3.0).size() == 1);
    const auto four = chunk_signal(seconds(9.0), 4.0, 4.0);
    CHECK(four.size() == 3);
    CHECK(four[0].samples.size() == 64000);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(chunk_signal(AudioBuffer{}, 3.0, 3.0), DataError);
    CHECK_THROWS_AS(chunk_signal(seconds(1.0), 0.0, 3.0), ConfigError);
    CHECK_THROWS_AS(chunk_signal(seconds(1.0), 3.0, -1.0), ConfigError);
  }

  TEST_CASE("peak normalization") {
    Chunk c{{0.25, -0.5}, 0.0, 0.0};
    CHECK(normalize_signal(c).samples == std::vector<double>{0.5, -1.0});
    Chunk zero{{0.0, 0.0, 0.0}, 0.0, 0.0};
    CHECK(normalize_signal(zero).samples == zero.samples);
    Chunk unit{{1.0, -0.3, 0.2}, 0.0, 0.0};
    CHECK(normalize_signal(unit).samples == unit.samples);
  }
}

TEST_SUITE("stft") {
  TEST_CASE("3 s chunk has 186 frames of 257 bins") {
    const Spectrogram s = stft(std::vector<double>(48000, 0.1));
    CHECK(s.frames() == 186);
    CHECK(s.bins() == 257);
    CHECK(s.fft_size == 512);
    CHECK(s.frame_hop_samples == 256);
  }

  TEST_CASE("1 kHz sine peaks at bin 32 in every frame, as does the naive DFT") {
    const auto x = oracle::tone(1000.0, 48000, 0.8);
    const Spectrogram s = stft(x);
    const auto ref = oracle::naive_spectrogram(x);
    REQUIRE(ref.size() == s.frames());
    for (std::size_t t = 0; t < s.frames(); ++t) {
      CHECK(argmax(s.power.row(t)) == 32);
      CHECK(argmax(ref[t]) == 32);
    }
  }

  TEST_CASE("all-zero chunk has all-zero power") {
    const Spectrogram s = stft(std::vector<double>(4096, 0.0));
    CHECK(std::all_of(s.power.data.begin(), s.power.data.end(), [](double v) { return v == 0.0; }));
  }

  TEST_CASE("shorter than a window is an error") {
    CHECK_THROWS_AS(stft(std::vector<double>(511, 0.0)), DataError);
  }

  TEST_CASE("frame-count law over random lengths") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> len(512, 200000);
    for (int i = 0; i < 50; ++i) {
      const std::size_t n = len(rng);
      CHECK(stft(std::vector<double>(n, 0.0)).frames() == (n - 512) / 256 + 1);
    }
  }

  TEST_CASE("matches the naive DFT and satisfies Parseval") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> len(512, 2048);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    const auto w = oracle::hann(512);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(len(rng));
      for (double& v : x) v = amp(rng);
      const Spectrogram s = stft(x);
      const auto ref = oracle::naive_spectrogram(x);
      REQUIRE(ref.size() == s.frames());
      for (std::size_t t = 0; t < s.frames(); ++t) {
        double scale = 0.0;
        for (double v : ref[t]) scale = std::max(scale, v);
        for (std::size_t k = 0; k < s.bins(); ++k) {
          CHECK(std::abs(s.power(t, k) - ref[t][k]) <= 1e-6 * scale);
        }
        double energy = 0.0;
        for (std::size_t n = 0; n < 512; ++n) energy += std::pow(x[t * 256 + n] * w[n], 2);
        double spectral = s.power(t, 0) + s.power(t, 256);
        for (std::size_t k = 1; k < 256; ++k) spectral += 2.0 * s.power(t, k);
        CHECK(spectral / 512.0 == doctest::Approx(energy).epsilon(1e-6));
      }
    }
  }
}

TEST_SUITE("mel") {
  TEST_CASE("HTK formula") {
    CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-5));
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
  }

  TEST_CASE("128 x 257, nonnegative, every row positive, centers increasing") {
    const MelFilterbank fb = build_mel_filterbank();
    CHECK(fb.n_mels == 128);
    CHECK(fb.weights.rows == 128);
    CHECK(fb.weights.cols == 257);
    CHECK(fb.f_max_hz == 8000.0);
    for (std::size_t m = 0; m < 128; ++m) {
      double sum = 0.0;
      for (double w : fb.weights.row(m)) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        sum += w;
      }
      CHECK(sum > 0.0);
      if (m > 0) CHECK(fb.center_hz[m] > fb.center_hz[m - 1]);
    }
  }

  TEST_CASE("weights follow the triangle edges") {
    const MelFilterbank fb = build_mel_filterbank();
    for (int m = 1; m < 128; ++m) {
      const auto e = oracle::mel_triangle(m);
      CHECK(fb.center_hz[static_cast<std::size_t>(m)] == doctest::Approx(e.center));
      for (std::size_t k = 0; k < 257; ++k) {
        const double f = 31.25 * static_cast<double>(k);
        const double expect =
            f <= e.left || f >= e.right ? 0.0
            : f <= e.center             ? (f - e.left) / (e.center - e.left)
                                        : (e.right - f) / (e.right - e.center);
        CHECK(fb.weights(static_cast<std::size_t>(m), k) == doctest::Approx(expect).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("all-ones spectrum yields per-row sums") {
    const MelFilterbank fb = build_mel_filterbank();
    Spectrogram ones;
    ones.power = Matrix<double>(2, 257, 1.0);
    const auto mel = apply_filterbank(ones, fb);
    for (std::size_t m = 0; m < 128; ++m) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 257; ++k) sum += fb.weights(m, k) * 1.0;
      CHECK(mel(0, m) == doctest::Approx(sum).epsilon(1e-12));
      CHECK(mel(1, m) == mel(0, m));
    }
  }

  TEST_CASE("matches the dense matrix product exactly") {
    const MelFilterbank fb = build_mel_filterbank();
    std::mt19937_64 rng(8);
    std::exponential_distribution<double> e(1.0);
    Spectrogram s;
    s.power = Matrix<double>(5, 257, 0.0);
    for (double& v : s.power.data) v = e(rng);
    const auto mel = apply_filterbank(s, fb);
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t m = 0; m < 128; ++m) {
        double dense = 0.0;
        for (std::size_t k = 0; k < 257; ++k) dense += fb.weights(m, k) * s.power(t, k);
        REQUIRE(mel(t, m) == dense);
      }
    }
  }

  TEST_CASE("degenerate ranges are rejected") {
    CHECK_THROWS_AS(build_mel_filterbank(512, 16000, 128, 4000.0, 4000.0), ConfigError);
    CHECK_THROWS_AS(build_mel_filterbank(512, 16000, 128, 0.0, 9000.0), ConfigError);
    CHECK_THROWS_AS(build_mel_filterbank(512, 16000, 0), ConfigError);
  }
}

TEST_SUITE("db and scaling") {
  TEST_CASE("power_to_db reference and floor") {
    Matrix<double> p(1, 3);
    p.data = {2.0, 0.2, 2e-12};
    const auto db = power_to_db(p);
    CHECK(db.data[0] == 0.0);
    CHECK(db.data[1] == doctest::Approx(-10.0).epsilon(1e-12));
    CHECK(db.data[2] == -80.0);
    const auto zero = power_to_db(Matrix<double>(3, 4, 0.0));
    CHECK(std::all_of(zero.data.begin(), zero.data.end(), [](double v) { return v == -80.0; }));
  }

  TEST_CASE("minmax examples") {
    Matrix<double> db(1, 3);
    db.data = {-80.0, -40.0, 0.0};
    CHECK(minmax_scale(db).data == std::vector<std::uint8_t>{0, 128, 255});
    const auto flat = minmax_scale(Matrix<double>(4, 4, -12.5));
    CHECK(std::all_of(flat.data.begin(), flat.data.end(), [](std::uint8_t v) { return v == 0; }));
  }

  TEST_CASE("minmax attains both endpoints on random input") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-80.0, 0.0);
    for (int t = 0; t < 100; ++t) {
      Matrix<double> db(7, 9);
      for (double& v : db.data) v = u(rng);
      const auto s = minmax_scale(db);
      const auto [lo, hi] = std::minmax_element(s.data.begin(), s.data.end());
      CHECK(*lo == 0);
      CHECK(*hi == 255);
    }
  }
}

TEST_SUITE("image") {
  TEST_CASE("viridis endpoints and injectivity") {
    const ColorMap& cm = ColorMap::viridis();
    CHECK(cm[0] == Rgb{68, 1, 84});
    CHECK(cm[255] == Rgb{253, 231, 37});
    std::set<Rgb> distinct(cm.table().begin(), cm.table().end());
    CHECK(distinct.size() == 256);
  }

  TEST_CASE("colormap lookup, orientation and determinism") {
    Matrix<std::uint8_t> scaled(3, 2, 7);  // 3 frames, 2 mel bins
    scaled(1, 0) = 255;                     // frame 1, lowest mel bin
    const ImageTensor img = apply_colormap(scaled, ColorMap::viridis());
    CHECK(img.height == 2);
    CHECK(img.width == 3);
    CHECK(img.at(0, 1, 1) == 253.0);  // bottom row holds mel bin 0
    CHECK(img.at(1, 1, 1) == 231.0);
    CHECK(img.at(0, 0, 0) == img.at(0, 0, 2));
    CHECK(img.at(2, 1, 0) == img.at(2, 0, 2));
  }

  TEST_CASE("custom colormap csv must have 256 rows") {
    CHECK_THROWS_AS(ColorMap::parse_csv("1,2,3\n", "short"), DataError);
    CHECK_THROWS_AS(ColorMap::parse_csv("1,2,300\n", "bad"), DataError);
  }

  TEST_CASE("bilinear: constant, identity, checkerboard center") {
    ImageTensor constant(37, 91, ImageStage::kRawRgb, 68.0);
    const auto up = resize_bilinear(constant);
    CHECK(up.height == 224);
    CHECK(up.width == 224);
    CHECK(std::all_of(up.values.begin(), up.values.end(), [](double v) { return v == 68.0; }));

    ImageTensor same(224, 224, ImageStage::kRawRgb);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    for (double& v : same.values) v = u(rng);
    CHECK(resize_bilinear(same) == same);

    ImageTensor checker(2, 2, ImageStage::kRawRgb);
    for (int c = 0; c < 3; ++c) {
      checker.at(c, 0, 0) = 0.0;
      checker.at(c, 0, 1) = 255.0;
      checker.at(c, 1, 0) = 255.0;
      checker.at(c, 1, 1) = 0.0;
    }
    const auto odd = resize_bilinear(checker, 225, 225);
    CHECK(std::abs(odd.at(0, 112, 112) - 127.5) <= 1e-6);
    // Even target: the four central pixels straddle the center symmetrically.
    const auto even = resize_bilinear(checker, 224, 224);
    const double mean4 = (even.at(1, 111, 111) + even.at(1, 111, 112) + even.at(1, 112, 111) +
                          even.at(1, 112, 112)) / 4.0;
    CHECK(std::abs(mean4 - 127.5) <= 1e-6);
  }

  TEST_CASE("bilinear output stays within source range") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(10.0, 200.0);
    for (int t = 0; t < 10; ++t) {
      ImageTensor img(5 + t, 9 + 2 * t, ImageStage::kRawRgb);
      for (double& v : img.values) v = u(rng);
      const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
      const auto out = resize_bilinear(img);
      for (double v : out.values) {
        CHECK(v >= *lo);
        CHECK(v <= *hi);
      }
    }
  }

  TEST_CASE("imagenet normalization formula and inverse") {
    ImageTensor px(1, 1, ImageStage::kRawRgb);
    px.values = {124.0, 116.0, 104.0};
    const auto n = imagenet_normalize(px);
    CHECK(n.stage == ImageStage::kNormalized);
    CHECK(n.values[0] == doctest::Approx((124.0 / 255.0 - 0.485) / 0.229).epsilon(1e-12));
    CHECK(n.values[0] == doctest::Approx(0.027).epsilon(0.05));
    CHECK(n.values[1] == doctest::Approx(0.035).epsilon(0.05));
    CHECK(n.values[2] == doctest::Approx(0.042).epsilon(0.05));

    const auto z = imagenet_normalize(ImageTensor(2, 2, ImageStage::kRawRgb, 0.0));
    CHECK(z.at(0, 1, 1) == doctest::Approx(-0.485 / 0.229));
    CHECK(z.at(1, 0, 0) == doctest::Approx(-0.456 / 0.224));
    CHECK(z.at(2, 1, 0) == doctest::Approx(-0.406 / 0.225));

    CHECK_THROWS_AS(imagenet_normalize(n), InvariantError);
    CHECK_THROWS_AS(imagenet_denormalize(px), InvariantError);

    ImageTensor img(16, 16, ImageStage::kRawRgb);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    for (double& v : img.values) v = u(rng);
    const auto back = imagenet_denormalize(imagenet_normalize(img));
    for (std::size_t i = 0; i < img.values.size(); ++i) {
      CHECK(std::abs(back.values[i] - img.values[i]) <= 1e-6);
    }
  }

  TEST_CASE("png export round trip and header") {
    test::TempDir dir;
    ImageTensor red(224, 224, ImageStage::kRawRgb, 0.0);
    std::fill(red.values.begin(), red.values.begin() + static_cast<std::ptrdiff_t>(red.plane()), 255.0);
    export_png(red, dir.path() / "red.png");
    const auto decoded = read_png(dir.path() / "red.png");
    CHECK(decoded == red);

    std::ifstream in(dir.path() / "red.png", std::ios::binary);
    unsigned char hdr[24];
    in.read(reinterpret_cast<char*>(hdr), 24);
    auto be32 = [&](int off) {
      return (hdr[off] << 24) | (hdr[off + 1] << 16) | (hdr[off + 2] << 8) | hdr[off + 3];
    };
    CHECK(std::string(reinterpret_cast<char*>(hdr + 12), 4) == "IHDR");
    CHECK(be32(16) == 224);
    CHECK(be32(20) == 224);

    ImageTensor bytes(3, 5, ImageStage::kRawRgb);
    for (std::size_t i = 0; i < bytes.values.size(); ++i) bytes.values[i] = static_cast<double>((i * 37) % 256);
    export_png(bytes, dir.path() / "bytes.png");
    CHECK(read_png(dir.path() / "bytes.png") == bytes);

    CHECK_THROWS_AS(export_png(imagenet_normalize(red), dir.path() / "n.png"), InvariantError);
  }
}

TEST_SUITE("render") {
  TEST_CASE("deterministic and pure") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 0.3);
    Chunk c;
    c.samples.resize(48000);
    for (double& v : c.samples) v = g(rng);
    const auto a = render_chunk(c);
    const auto b = render_chunk(c);
    CHECK(a == b);
    CHECK(a.height == 224);
    CHECK(a.width == 224);
    CHECK(a.stage == ImageStage::kNormalized);
    const Frontend other;
    CHECK(other.render_chunk(c) == a);
  }

  TEST_CASE("silence renders a spatially constant tensor") {
    Chunk silent{std::vector<double>(48000, 0.0), 0.0, 3.0};
    const auto img = render_chunk(silent);
    for (int ch = 0; ch < 3; ++ch) {
      const double v0 = img.at(ch, 0, 0);
      for (int y = 0; y < 224; ++y) {
        for (int x = 0; x < 224; ++x) REQUIRE(img.at(ch, y, x) == v0);
      }
    }
    CHECK(render_chunk(silent).at(0, 0, 0) == doctest::Approx((68.0 / 255 - 0.485) / 0.229));
  }

  TEST_CASE("1 kHz tone lands in a mel filter that contains 1 kHz") {
    const Frontend fe;
    Chunk c{oracle::tone(1000.0, 48000, 0.5), 0.0, 3.0};
    const auto img = fe.render_raw(c);
    std::vector<double> lum(224, 0.0);
    for (int y = 0; y < 224; ++y) {
      for (int x = 0; x < 224; ++x) {
        lum[static_cast<std::size_t>(y)] +=
            0.2126 * img.at(0, y, x) + 0.7152 * img.at(1, y, x) + 0.0722 * img.at(2, y, x);
      }
    }
    const auto row = static_cast<int>(argmax(lum));
    const int bin = 127 - static_cast<int>(std::lround((row + 0.5) * 128.0 / 224.0 - 0.5));
    const auto e = oracle::mel_triangle(bin);
    CHECK(e.left < 1000.0);
    CHECK(e.right > 1000.0);
  }

  TEST_CASE("stages compose to the rendered tensor") {
    const Frontend fe;
    Chunk c{oracle::tone(440.0, 20000, 0.3), 0.0, 1.25};
    const auto s = fe.render_stages(c);
    CHECK(s.plot.height == 128);
    CHECK(s.plot.width == static_cast<int>(stft_frame_count(20000)));
    CHECK(imagenet_normalize(s.resized) == fe.render_chunk(c));
  }

  TEST_CASE("fingerprint tracks the configuration") {
    const Frontend a;
    FrontendConfig cfg;
    cfg.n_mels = 64;
    const Frontend b(cfg);
    CHECK(a.fingerprint() == Frontend().fingerprint());
    CHECK_FALSE(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint().colormap_hash == ColorMap::viridis().hash());
  }
}
