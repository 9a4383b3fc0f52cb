#include "dslite/nn/predict.hpp"

#include <algorithm>
#include <map>

#include "dslite/audio.hpp"
#include "dslite/error.hpp"

namespace dslite::nn {

std::vector<LabelVector> predict_images(const Model& m, std::span<const ImageTensor> images,
                                        int batch_size) {
  std::vector<LabelVector> out;
  out.reserve(images.size());
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < images.size(); start += step) {
    const auto part = images.subspan(start, std::min(step, images.size() - start));
    const ForwardResult r = m.forward(to_batch(part), false);
    const std::size_t c = r.probs.stride();
    for (int s = 0; s < r.probs.batch(); ++s) out.emplace_back(r.probs.sample(s), r.probs.sample(s) + c);
  }
  return out;
}

LabelVector mean_probabilities(std::span<const LabelVector> rows) {
  if (rows.empty()) throw InvariantError("mean_probabilities: no rows");
  LabelVector mean(rows[0].size(), 0.0);
  for (const auto& r : rows) {
    if (r.size() != mean.size()) throw InvariantError("mean_probabilities: ragged rows");
    for (std::size_t k = 0; k < r.size(); ++k) mean[k] += r[k];
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

PredictionSet predict_items(const Model& m, std::span<const Sample> data, int batch_size) {
  std::vector<ImageTensor> images;
  images.reserve(data.size());
  for (const auto& s : data) images.push_back(s.image);
  const auto probs = predict_images(m, images, batch_size);

  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<LabelVector>> rows;
  PredictionSet p{m.classes(), {}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [it, fresh] = slot.try_emplace(data[i].item, rows.size());
    if (fresh) {
      rows.emplace_back();
      p.items.push_back({data[i].item, data[i].label, 0, {}});
    } else if (p.items[it->second].truth != data[i].label) {
      throw DataError("chunks of '" + data[i].item + "' carry different labels");
    }
    rows[it->second].push_back(probs[i]);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    p.items[k].probs = mean_probabilities(rows[k]);
    p.items[k].predicted = argmax(p.items[k].probs);
  }
  return p;
}

void require_fingerprint(const Model& m, const Frontend& fe) {
  const PreprocessFingerprint runtime = fe.fingerprint();
  if (!(m.fingerprint == runtime)) {
    throw FingerprintMismatch("model preprocessing fingerprint {" + m.fingerprint.describe() +
                              "} does not match the runtime {" + runtime.describe() + "}");
  }
}

FilePrediction predict_file(const Model& m, const Frontend& fe, const std::string& path,
                            double chunk_len_s, double hop_s) {
  require_fingerprint(m, fe);
  const AudioBuffer audio = load_wav(path);
  const auto chunks = chunk_signal(audio, chunk_len_s, hop_s);
  std::vector<ImageTensor> images;
  FilePrediction fp;
  for (const auto& c : chunks) {
    images.push_back(fe.render_chunk(c));
    fp.chunk_starts_s.push_back(c.start_s);
  }
  fp.chunk_probs = predict_images(m, images);
  fp.probs = mean_probabilities(fp.chunk_probs);
  fp.label = argmax(fp.probs);
  return fp;
}

}  // namespace dslite::nn
