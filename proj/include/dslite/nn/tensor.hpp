#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace dslite::nn {

using Shape = std::vector<int>;

inline std::size_t element_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::string to_string(const Shape& s);

// Batch-major dense tensor: (N, C, H, W) for feature maps, (N, F) for vectors.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(element_count(shape), fill) {}

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  int batch() const { return shape.empty() ? 0 : shape[0]; }
  // Elements per batch item.
  std::size_t stride() const { return shape.empty() ? 0 : data.size() / static_cast<std::size_t>(shape[0]); }
  double* sample(int n) { return data.data() + static_cast<std::size_t>(n) * stride(); }
  const double* sample(int n) const { return data.data() + static_cast<std::size_t>(n) * stride(); }

  bool operator==(const Tensor&) const = default;
};

}  // namespace dslite::nn
