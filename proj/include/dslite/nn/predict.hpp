#pragma once

#include <span>
#include <string>
#include <vector>

#include "dslite/augment.hpp"
#include "dslite/eval.hpp"
#include "dslite/frontend.hpp"
#include "dslite/nn/model.hpp"
#include "dslite/nn/train.hpp"

namespace dslite::nn {

// Inference probabilities, one row per image, in batches of `batch_size`.
std::vector<LabelVector> predict_images(const Model& m, std::span<const ImageTensor> images,
                                        int batch_size = 32);

// Unweighted mean of chunk probability rows.
LabelVector mean_probabilities(std::span<const LabelVector> rows);

int argmax(std::span<const double> v);

// File-level predictions: chunk probabilities pooled by Sample::item with the
// unweighted mean, items in first-seen order.
PredictionSet predict_items(const Model& m, std::span<const Sample> data, int batch_size = 32);

struct FilePrediction {
  LabelVector probs;
  int label = 0;
  std::vector<LabelVector> chunk_probs;
  std::vector<double> chunk_starts_s;
};

// Throws FingerprintMismatch when the model was trained under a different
// preprocessing configuration.
void require_fingerprint(const Model& m, const Frontend& fe);

FilePrediction predict_file(const Model& m, const Frontend& fe, const std::string& path,
                            double chunk_len_s, double hop_s);

}  // namespace dslite::nn
