#include "dslite/image.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dslite/error.hpp"

namespace dslite {

// Defined in the generated viridis_table.cpp.
extern const char* const kViridisCsv;

ColorMap::ColorMap(std::string name, const std::array<Rgb, 256>& table)
    : name_(std::move(name)), table_(table) {}

const ColorMap& ColorMap::viridis() {
  static const ColorMap cm = parse_csv(kViridisCsv, "viridis");
  return cm;
}

ColorMap ColorMap::from_csv(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open colormap: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), std::move(name));
}

ColorMap ColorMap::parse_csv(const std::string& text, std::string name) {
  std::array<Rgb, 256> table{};
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (row >= 256) throw DataError("colormap has more than 256 rows");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    int r = -1, g = -1, b = -1;
    if (!(fields >> r >> g >> b) || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
      throw DataError("colormap line " + std::to_string(line_no) + ": expected r,g,b in 0..255");
    }
    table[row++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                    static_cast<std::uint8_t>(b)};
  }
  if (row != 256) throw DataError("colormap needs exactly 256 rows, got " + std::to_string(row));
  return ColorMap(std::move(name), table);
}

std::uint32_t ColorMap::hash() const {
  const auto* bytes = reinterpret_cast<const Bytef*>(table_.data());
  return static_cast<std::uint32_t>(crc32(0L, bytes, static_cast<uInt>(sizeof(table_))));
}

ImageTensor apply_colormap(const Matrix<std::uint8_t>& scaled, const ColorMap& cm) {
  const int frames = static_cast<int>(scaled.rows);
  const int mels = static_cast<int>(scaled.cols);
  ImageTensor img(mels, frames, ImageStage::kRawRgb);
  for (int t = 0; t < frames; ++t) {
    for (int m = 0; m < mels; ++m) {
      const Rgb& rgb = cm[scaled(static_cast<std::size_t>(t), static_cast<std::size_t>(m))];
      const int y = mels - 1 - m;
      for (int c = 0; c < 3; ++c) img.at(c, y, t) = rgb[static_cast<std::size_t>(c)];
    }
  }
  return img;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> taps(int src, int dst) {
  std::vector<Tap> out(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src - 1);
    out[static_cast<std::size_t>(i)] = {lo, hi, s - lo};
  }
  return out;
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& img, int out_height, int out_width) {
  if (img.height < 1 || img.width < 1 || out_height < 1 || out_width < 1) {
    throw InvariantError("resize_bilinear: image dimensions must be >= 1");
  }
  if (img.height == out_height && img.width == out_width) return img;
  const auto ty = taps(img.height, out_height);
  const auto tx = taps(img.width, out_width);
  ImageTensor out(out_height, out_width, img.stage);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out_height; ++y) {
      const Tap& vy = ty[static_cast<std::size_t>(y)];
      for (int x = 0; x < out_width; ++x) {
        const Tap& vx = tx[static_cast<std::size_t>(x)];
        const double p00 = img.at(c, vy.lo, vx.lo);
        const double p01 = img.at(c, vy.lo, vx.hi);
        const double p10 = img.at(c, vy.hi, vx.lo);
        const double p11 = img.at(c, vy.hi, vx.hi);
        // Difference form keeps constant regions exact.
        const double top = p00 + vx.frac * (p01 - p00);
        const double bottom = p10 + vx.frac * (p11 - p10);
        out.at(c, y, x) = top + vy.frac * (bottom - top);
      }
    }
  }
  return out;
}

ImageTensor imagenet_normalize(const ImageTensor& img) {
  if (img.stage != ImageStage::kRawRgb) {
    throw InvariantError("imagenet_normalize: image is already normalized");
  }
  ImageTensor out = img;
  out.stage = ImageStage::kNormalized;
  const std::size_t plane = img.plane();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out.values[c * plane + i];
      v = (v / 255.0 - kImagenetMean[c]) / kImagenetStd[c];
    }
  }
  return out;
}

ImageTensor imagenet_denormalize(const ImageTensor& img) {
  if (img.stage != ImageStage::kNormalized) {
    throw InvariantError("imagenet_denormalize: image is not normalized");
  }
  ImageTensor out = img;
  out.stage = ImageStage::kRawRgb;
  const std::size_t plane = img.plane();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out.values[c * plane + i];
      v = (v * kImagenetStd[c] + kImagenetMean[c]) * 255.0;
    }
  }
  return out;
}

void export_png(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.stage != ImageStage::kRawRgb) throw InvariantError("export_png: expects a raw RGB image");
  std::vector<png_byte> rgb(img.plane() * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(std::round(img.at(c, y, x)), 0.0, 255.0);
        rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = static_cast<png_byte>(v);
      }
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr) == 0) {
    throw DataError("png write failed for " + path.string() + ": " + image.message);
  }
}

ImageTensor read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
    throw DataError("png read failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> rgb(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr) == 0) {
    throw DataError("png decode failed for " + path.string() + ": " + image.message);
  }
  ImageTensor img(static_cast<int>(image.height), static_cast<int>(image.width),
                  ImageStage::kRawRgb);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + c];
      }
    }
  }
  return img;
}

}  // namespace dslite
