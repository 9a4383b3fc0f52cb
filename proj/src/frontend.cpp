#include "dslite/frontend.hpp"

#include <iomanip>
#include <sstream>

#include "dslite/error.hpp"

namespace dslite {

std::string PreprocessFingerprint::describe() const {
  std::ostringstream os;
  os << "sr=" << sample_rate_hz << " window=" << window_samples << " hop=" << hop_samples
     << " mels=" << n_mels << " colormap=0x" << std::hex << std::setw(8) << std::setfill('0')
     << colormap_hash << std::dec << " image=" << image_height << "x" << image_width;
  os << std::setprecision(6) << " mean=(" << mean[0] << "," << mean[1] << "," << mean[2]
     << ") std=(" << std[0] << "," << std[1] << "," << std[2] << ")";
  return os.str();
}

Frontend::Frontend(FrontendConfig cfg)
    : cfg_(std::move(cfg)),
      colormap_(cfg_.colormap ? cfg_.colormap
                              : std::shared_ptr<const ColorMap>(&ColorMap::viridis(),
                                                                [](const ColorMap*) {})),
      filterbank_(build_mel_filterbank(kFftSize, kSampleRateHz, cfg_.n_mels)) {
  if (cfg_.image_side < 1) throw ConfigError("image side must be >= 1");
}

RenderStages Frontend::render_stages(const Chunk& c) const {
  RenderStages s;
  const Chunk normalized = normalize_signal(c);
  s.spectrogram = stft(normalized);
  s.mel_power = apply_filterbank(s.spectrogram, filterbank_);
  s.mel_db = power_to_db(s.mel_power);
  s.scaled = minmax_scale(s.mel_db);
  s.plot = apply_colormap(s.scaled, *colormap_);
  s.resized = resize_bilinear(s.plot, cfg_.image_side, cfg_.image_side);
  return s;
}

ImageTensor Frontend::render_raw(const Chunk& c) const {
  const Chunk normalized = normalize_signal(c);
  const Spectrogram spec = stft(normalized);
  const auto scaled = minmax_scale(power_to_db(apply_filterbank(spec, filterbank_)));
  return resize_bilinear(apply_colormap(scaled, *colormap_), cfg_.image_side, cfg_.image_side);
}

ImageTensor Frontend::render_chunk(const Chunk& c) const {
  return imagenet_normalize(render_raw(c));
}

PreprocessFingerprint Frontend::fingerprint() const {
  PreprocessFingerprint fp;
  fp.n_mels = static_cast<std::uint32_t>(cfg_.n_mels);
  fp.colormap_hash = colormap_->hash();
  fp.image_height = static_cast<std::uint32_t>(cfg_.image_side);
  fp.image_width = static_cast<std::uint32_t>(cfg_.image_side);
  return fp;
}

ImageTensor render_chunk(const Chunk& c) {
  static const Frontend frontend;
  return frontend.render_chunk(c);
}

}  // namespace dslite
