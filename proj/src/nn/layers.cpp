#include "dslite/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dslite/error.hpp"

namespace dslite::nn {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ")";
  return os.str();
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kArelu: return "arelu";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool Layer::has_trainable() const {
  return std::any_of(params_.begin(), params_.end(), [](const Param& p) { return p.trainable; });
}

LayerSpec Layer::spec() const {
  return LayerSpec{kind(), spec_ints(), spec_reals(), frozen, concat_from};
}

namespace {

void expect_rank(const Shape& in, std::size_t rank, const char* layer) {
  if (in.size() != rank) {
    throw InvariantError(std::string(layer) + ": expected rank-" + std::to_string(rank) +
                         " per-sample input, got " + to_string(in));
  }
}

Shape sample_shape(const Tensor& t) { return Shape(t.shape.begin() + 1, t.shape.end()); }

Param uniform_param(std::string name, Shape shape, double limit, Rng& rng) {
  Param p{std::move(name), shape, std::vector<double>(element_count(shape)), true};
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& v : p.value) v = u(rng);
  return p;
}

Param constant_param(std::string name, Shape shape, double v, bool trainable = true) {
  return Param{std::move(name), shape, std::vector<double>(element_count(shape), v), trainable};
}

// ---------------------------------------------------------------- conv2d

class Conv2d final : public Layer {
 public:
  Conv2d(int cin, int cout, int k) : cin_(cin), cout_(cout), k_(k) {
    params_.push_back(constant_param("weight", {cout, cin, k, k}, 0.0));
    params_.push_back(constant_param("bias", {cout}, 0.0));
  }

  LayerKind kind() const override { return LayerKind::kConv2d; }
  std::vector<std::int64_t> spec_ints() const override { return {cin_, cout_, k_}; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "conv2d");
    if (in[0] != cin_) throw InvariantError("conv2d: expected " + std::to_string(cin_) + " channels, got " + to_string(in));
    return {cout_, in[1], in[2]};
  }

  std::uint64_t flops(const Shape& in) const override {
    const Shape out = output_shape(in);
    return 2ULL * k_ * k_ * cin_ * cout_ * static_cast<std::uint64_t>(out[1]) * out[2];
  }

  Tensor forward(const Tensor& x, LayerCache&, const ForwardContext&) override {
    const Shape out_s = output_shape(sample_shape(x));
    const int n = x.batch(), h = out_s[1], w = out_s[2];
    Tensor y({n, cout_, h, w});
    const auto& wt = params_[0].value;
    const auto& b = params_[1].value;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int s = 0; s < n; ++s) {
      const double* in = x.sample(s);
      double* out = y.sample(s);
      for (int co = 0; co < cout_; ++co) {
        double* op = out + co * plane;
        std::fill(op, op + plane, b[static_cast<std::size_t>(co)]);
        for (int ci = 0; ci < cin_; ++ci) {
          const double* ip = in + ci * plane;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              const double wv = wt[((static_cast<std::size_t>(co) * cin_ + ci) * k_ + ky) * k_ + kx];
              shift_accumulate(op, ip, wv, ky - k_ / 2, kx - k_ / 2, h, w);
            }
          }
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const Tensor& dy, const LayerCache&,
                  bool need_input_grad, std::vector<std::vector<double>>* grads) const override {
    const int n = x.batch(), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor dx;
    if (need_input_grad) dx = Tensor(x.shape);
    std::vector<double> dw, db;
    if (grads) {
      dw.assign(params_[0].value.size(), 0.0);
      db.assign(params_[1].value.size(), 0.0);
    }
    const auto& wt = params_[0].value;
    for (int s = 0; s < n; ++s) {
      const double* in = x.sample(s);
      const double* g = dy.sample(s);
      for (int co = 0; co < cout_; ++co) {
        const double* gp = g + co * plane;
        if (grads) {
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
          db[static_cast<std::size_t>(co)] += acc;
        }
        for (int ci = 0; ci < cin_; ++ci) {
          const double* ip = in + ci * plane;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              const std::size_t wi = ((static_cast<std::size_t>(co) * cin_ + ci) * k_ + ky) * k_ + kx;
              const int dy_ = ky - k_ / 2, dx_ = kx - k_ / 2;
              if (grads) dw[wi] += shifted_dot(gp, ip, dy_, dx_, h, w);
              if (need_input_grad) {
                // out[y][x] used in[y+dy][x+dx], so route the gradient back.
                shift_accumulate(dx.sample(s) + ci * plane, gp, wt[wi], -dy_, -dx_, h, w);
              }
            }
          }
        }
      }
    }
    if (grads) {
      grads->push_back(std::move(dw));
      grads->push_back(std::move(db));
    }
    return dx;
  }

 private:
  // dst[y][x] += wv * src[y + oy][x + ox] over in-bounds positions.
  static void shift_accumulate(double* dst, const double* src, double wv, int oy, int ox, int h, int w) {
    const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
    const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
    for (int y = y0; y < y1; ++y) {
      double* d = dst + static_cast<std::size_t>(y) * w;
      const double* sp = src + static_cast<std::size_t>(y + oy) * w + ox;
      for (int x = x0; x < x1; ++x) d[x] += wv * sp[x];
    }
  }

  // sum over y, x of g[y][x] * src[y + oy][x + ox].
  static double shifted_dot(const double* g, const double* src, int oy, int ox, int h, int w) {
    const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
    const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
    double acc = 0.0;
    for (int y = y0; y < y1; ++y) {
      const double* gp = g + static_cast<std::size_t>(y) * w;
      const double* sp = src + static_cast<std::size_t>(y + oy) * w + ox;
      for (int x = x0; x < x1; ++x) acc += gp[x] * sp[x];
    }
    return acc;
  }

  int cin_, cout_, k_;
};

// ------------------------------------------------------------ batch norm

// Batch statistics in training; running statistics at inference and whenever
// the layer is frozen.
class BatchNorm final : public Layer {
 public:
  BatchNorm(int channels, double momentum, double eps) : c_(channels), momentum_(momentum), eps_(eps) {
    params_.push_back(constant_param("gamma", {channels}, 1.0));
    params_.push_back(constant_param("beta", {channels}, 0.0));
    params_.push_back(constant_param("running_mean", {channels}, 0.0, false));
    params_.push_back(constant_param("running_var", {channels}, 1.0, false));
  }

  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  std::vector<std::int64_t> spec_ints() const override { return {c_}; }
  std::vector<double> spec_reals() const override { return {momentum_, eps_}; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "batch_norm");
    if (in[0] != c_) throw InvariantError("batch_norm: channel mismatch " + to_string(in));
    return in;
  }

  std::uint64_t flops(const Shape& in) const override { return 2ULL * element_count(in); }

  Tensor forward(const Tensor& x, LayerCache& cache, const ForwardContext& ctx) override {
    output_shape(sample_shape(x));
    const int n = x.batch();
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const auto& gamma = params_[0].value;
    const auto& beta = params_[1].value;
    auto& rmean = params_[2].value;
    auto& rvar = params_[3].value;
    Tensor y(x.shape);
    const bool batch_stats = ctx.training && !frozen;
    cache.indices = {batch_stats ? 1U : 0U};
    if (!batch_stats) {
      for (int s = 0; s < n; ++s) {
        for (int c = 0; c < c_; ++c) {
          const double scale = gamma[c] / std::sqrt(rvar[c] + eps_);
          const double shift = beta[c] - rmean[c] * scale;
          const double* xp = x.sample(s) + c * plane;
          double* yp = y.sample(s) + c * plane;
          for (std::size_t i = 0; i < plane; ++i) yp[i] = xp[i] * scale + shift;
        }
      }
      return y;
    }
    // values: xhat (x.size()) followed by inv_std per channel.
    cache.values.assign(x.size() + static_cast<std::size_t>(c_), 0.0);
    const double m = static_cast<double>(n) * plane;
    for (int c = 0; c < c_; ++c) {
      double mean = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* xp = x.sample(s) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += xp[i];
      }
      mean /= m;
      double var = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* xp = x.sample(s) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) var += (xp[i] - mean) * (xp[i] - mean);
      }
      var /= m;
      const double inv_std = 1.0 / std::sqrt(var + eps_);
      cache.values[x.size() + static_cast<std::size_t>(c)] = inv_std;
      for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * x.stride() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xh = (x.data[off + i] - mean) * inv_std;
          cache.values[off + i] = xh;
          y.data[off + i] = gamma[c] * xh + beta[c];
        }
      }
      const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
      rmean[c] = momentum_ * rmean[c] + (1.0 - momentum_) * mean;
      rvar[c] = momentum_ * rvar[c] + (1.0 - momentum_) * unbiased;
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const Tensor& dy, const LayerCache& cache,
                  bool need_input_grad, std::vector<std::vector<double>>* grads) const override {
    const int n = x.batch();
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const auto& gamma = params_[0].value;
    const bool batch_stats = !cache.indices.empty() && cache.indices[0] == 1U;
    std::vector<double> dgamma(static_cast<std::size_t>(c_), 0.0), dbeta(static_cast<std::size_t>(c_), 0.0);
    Tensor dx;
    if (need_input_grad) dx = Tensor(x.shape);
    const double m = static_cast<double>(n) * plane;
    for (int c = 0; c < c_; ++c) {
      double inv_std;
      if (batch_stats) {
        inv_std = cache.values[x.size() + static_cast<std::size_t>(c)];
      } else {
        inv_std = 1.0 / std::sqrt(params_[3].value[c] + eps_);
      }
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * x.stride() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xh = batch_stats ? cache.values[off + i]
                                        : (x.data[off + i] - params_[2].value[c]) * inv_std;
          sum_dy += dy.data[off + i];
          sum_dy_xh += dy.data[off + i] * xh;
        }
      }
      dgamma[c] = sum_dy_xh;
      dbeta[c] = sum_dy;
      if (!need_input_grad) continue;
      for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * x.stride() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          if (batch_stats) {
            const double xh = cache.values[off + i];
            dx.data[off + i] = gamma[c] * inv_std / m * (m * dy.data[off + i] - sum_dy - xh * sum_dy_xh);
          } else {
            dx.data[off + i] = gamma[c] * inv_std * dy.data[off + i];
          }
        }
      }
    }
    if (grads) {
      grads->push_back(std::move(dgamma));
      grads->push_back(std::move(dbeta));
    }
    return dx;
  }

 private:
  int c_;
  double momentum_, eps_;
};

// -------------------------------------------------------------- max pool

class MaxPool final : public Layer {
 public:
  explicit MaxPool(int size) : size_(size) {}
  LayerKind kind() const override { return LayerKind::kMaxPool; }
  std::vector<std::int64_t> spec_ints() const override { return {size_}; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "max_pool");
    if (in[1] < size_ || in[2] < size_) throw InvariantError("max_pool: input smaller than window " + to_string(in));
    return {in[0], in[1] / size_, in[2] / size_};
  }

  std::uint64_t flops(const Shape& in) const override {
    return static_cast<std::uint64_t>(size_ * size_ - 1) * element_count(output_shape(in));
  }

  Tensor forward(const Tensor& x, LayerCache& cache, const ForwardContext&) override {
    const Shape o = output_shape(sample_shape(x));
    const int n = x.batch(), h = x.dim(2), w = x.dim(3);
    Tensor y({n, o[0], o[1], o[2]});
    cache.indices.resize(y.size());
    std::size_t k = 0;
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < o[0]; ++c) {
        const std::size_t base = static_cast<std::size_t>(s) * x.stride() + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < o[1]; ++oy) {
          for (int ox = 0; ox < o[2]; ++ox, ++k) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (int py = 0; py < size_; ++py) {
              for (int px = 0; px < size_; ++px) {
                const std::size_t idx = static_cast<std::size_t>(oy * size_ + py) * w + (ox * size_ + px);
                if (x.data[base + idx] > best) {
                  best = x.data[base + idx];
                  arg = idx;
                }
              }
            }
            y.data[k] = best;
            cache.indices[k] = static_cast<std::uint32_t>(arg);
          }
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& dy, const LayerCache& cache,
                  bool need_input_grad, std::vector<std::vector<double>>*) const override {
    if (!need_input_grad) return {};
    Tensor dx(x.shape);
    const int n = x.batch(), c = x.dim(1);
    const std::size_t in_plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t out_plane = y.stride() / static_cast<std::size_t>(c);
    std::size_t k = 0;
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = static_cast<std::size_t>(s) * x.stride() + ch * in_plane;
        for (std::size_t i = 0; i < out_plane; ++i, ++k) dx.data[base + cache.indices[k]] += dy.data[k];
      }
    }
    return dx;
  }

 private:
  int size_;
};

// ------------------------------------------------------ global avg pool

class GlobalAvgPool final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kGlobalAvgPool; }
  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "global_avg_pool");
    return {in[0]};
  }
  std::uint64_t flops(const Shape& in) const override { return element_count(in); }

  Tensor forward(const Tensor& x, LayerCache&, const ForwardContext&) override {
    output_shape(sample_shape(x));
    const int n = x.batch(), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor y({n, c});
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const double* p = x.sample(s) + ch * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        y.data[static_cast<std::size_t>(s) * c + ch] = acc / static_cast<double>(plane);
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const Tensor& dy, const LayerCache&,
                  bool need_input_grad, std::vector<std::vector<double>>*) const override {
    if (!need_input_grad) return {};
    Tensor dx(x.shape);
    const int n = x.batch(), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < c; ++ch) {
        const double g = dy.data[static_cast<std::size_t>(s) * c + ch] / static_cast<double>(plane);
        double* p = dx.sample(s) + ch * plane;
        std::fill(p, p + plane, g);
      }
    }
    return dx;
  }
};

// ----------------------------------------------------------------- dense

class Dense final : public Layer {
 public:
  Dense(int in, int out) : in_(in), out_(out) {
    params_.push_back(constant_param("weight", {out, in}, 0.0));
    params_.push_back(constant_param("bias", {out}, 0.0));
  }
  LayerKind kind() const override { return LayerKind::kDense; }
  std::vector<std::int64_t> spec_ints() const override { return {in_, out_}; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 1, "dense");
    if (in[0] != in_) throw InvariantError("dense: expected " + std::to_string(in_) + " features, got " + to_string(in));
    return {out_};
  }
  std::uint64_t flops(const Shape&) const override { return 2ULL * in_ * out_; }

  Tensor forward(const Tensor& x, LayerCache&, const ForwardContext&) override {
    output_shape(sample_shape(x));
    const int n = x.batch();
    Tensor y({n, out_});
    const auto& w = params_[0].value;
    const auto& b = params_[1].value;
    for (int s = 0; s < n; ++s) {
      const double* xp = x.sample(s);
      double* yp = y.sample(s);
      for (int o = 0; o < out_; ++o) {
        const double* wr = w.data() + static_cast<std::size_t>(o) * in_;
        double acc = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_; ++i) acc += wr[i] * xp[i];
        yp[o] = acc;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const Tensor& dy, const LayerCache&,
                  bool need_input_grad, std::vector<std::vector<double>>* grads) const override {
    const int n = x.batch();
    const auto& w = params_[0].value;
    Tensor dx;
    if (need_input_grad) dx = Tensor(x.shape);
    std::vector<double> dw, db;
    if (grads) {
      dw.assign(w.size(), 0.0);
      db.assign(static_cast<std::size_t>(out_), 0.0);
    }
    for (int s = 0; s < n; ++s) {
      const double* xp = x.sample(s);
      const double* g = dy.sample(s);
      for (int o = 0; o < out_; ++o) {
        const double go = g[o];
        if (grads) {
          db[static_cast<std::size_t>(o)] += go;
          double* dwr = dw.data() + static_cast<std::size_t>(o) * in_;
          for (int i = 0; i < in_; ++i) dwr[i] += go * xp[i];
        }
        if (need_input_grad) {
          const double* wr = w.data() + static_cast<std::size_t>(o) * in_;
          double* dxp = dx.sample(s);
          for (int i = 0; i < in_; ++i) dxp[i] += go * wr[i];
        }
      }
    }
    if (grads) {
      grads->push_back(std::move(dw));
      grads->push_back(std::move(db));
    }
    return dx;
  }

 private:
  int in_, out_;
};

// --------------------------------------------------------------- dropout

class Dropout final : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  }
  LayerKind kind() const override { return LayerKind::kDropout; }
  std::vector<double> spec_reals() const override { return {rate_}; }
  Shape output_shape(const Shape& in) const override { return in; }
  std::uint64_t flops(const Shape&) const override { return 0; }

  Tensor forward(const Tensor& x, LayerCache& cache, const ForwardContext& ctx) override {
    cache.values.clear();
    if (!ctx.training || rate_ == 0.0) return x;
    if (ctx.rng == nullptr) throw InvariantError("dropout: training forward needs a generator");
    std::bernoulli_distribution keep(1.0 - rate_);
    const double scale = 1.0 / (1.0 - rate_);
    cache.values.resize(x.size());
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      cache.values[i] = keep(*ctx.rng) ? scale : 0.0;
      y.data[i] = x.data[i] * cache.values[i];
    }
    return y;
  }

  Tensor backward(const Tensor&, const Tensor&, const Tensor& dy, const LayerCache& cache,
                  bool need_input_grad, std::vector<std::vector<double>>*) const override {
    if (!need_input_grad) return {};
    if (cache.values.empty()) return dy;
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = dy.data[i] * cache.values[i];
    return dx;
  }

 private:
  double rate_;
};

// ----------------------------------------------------------------- arelu

// f(x) = alpha x for x < 0, (1 + sigmoid(beta)) x otherwise; alpha is kept in
// [0.01, 0.99].
class Arelu final : public Layer {
 public:
  Arelu(double alpha, double beta) {
    params_.push_back(constant_param("alpha", {1}, std::clamp(alpha, kAreluAlphaMin, kAreluAlphaMax)));
    params_.push_back(constant_param("beta", {1}, beta));
  }
  LayerKind kind() const override { return LayerKind::kArelu; }
  Shape output_shape(const Shape& in) const override { return in; }
  std::uint64_t flops(const Shape& in) const override { return 2ULL * element_count(in); }
  void constrain() override {
    params_[0].value[0] = std::clamp(params_[0].value[0], kAreluAlphaMin, kAreluAlphaMax);
  }

  Tensor forward(const Tensor& x, LayerCache&, const ForwardContext&) override {
    const double alpha = std::clamp(params_[0].value[0], kAreluAlphaMin, kAreluAlphaMax);
    const double gain = 1.0 + sigmoid(params_[1].value[0]);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x.data[i];
      y.data[i] = v < 0.0 ? alpha * v : gain * v;
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const Tensor& dy, const LayerCache&,
                  bool need_input_grad, std::vector<std::vector<double>>* grads) const override {
    const double alpha = std::clamp(params_[0].value[0], kAreluAlphaMin, kAreluAlphaMax);
    const double sig = sigmoid(params_[1].value[0]);
    const double gain = 1.0 + sig;
    double dalpha = 0.0, dbeta = 0.0;
    Tensor dx;
    if (need_input_grad) dx = Tensor(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x.data[i];
      const double g = dy.data[i];
      if (v < 0.0) {
        dalpha += g * v;
        if (need_input_grad) dx.data[i] = g * alpha;
      } else {
        dbeta += g * v;
        if (need_input_grad) dx.data[i] = g * gain;
      }
    }
    if (grads) {
      grads->push_back({dalpha});
      grads->push_back({dbeta * sig * (1.0 - sig)});
    }
    return dx;
  }
};

// ------------------------------------------------------------------ relu

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  Shape output_shape(const Shape& in) const override { return in; }
  std::uint64_t flops(const Shape& in) const override { return element_count(in); }

  Tensor forward(const Tensor& x, LayerCache&, const ForwardContext&) override {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = std::max(0.0, x.data[i]);
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const Tensor& dy, const LayerCache&,
                  bool need_input_grad, std::vector<std::vector<double>>*) const override {
    if (!need_input_grad) return {};
    Tensor dx(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
    return dx;
  }
};

// --------------------------------------------------------------- softmax

class Softmax final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kSoftmax; }
  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 1, "softmax");
    return in;
  }
  std::uint64_t flops(const Shape& in) const override { return 3ULL * element_count(in); }

  Tensor forward(const Tensor& x, LayerCache&, const ForwardContext&) override {
    output_shape(sample_shape(x));
    Tensor y(x.shape);
    const int n = x.batch();
    const std::size_t c = x.stride();
    for (int s = 0; s < n; ++s) {
      const double* xp = x.sample(s);
      double* yp = y.sample(s);
      const double peak = *std::max_element(xp, xp + c);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) z += (yp[k] = std::exp(xp[k] - peak));
      for (std::size_t k = 0; k < c; ++k) yp[k] /= z;
    }
    return y;
  }

  Tensor backward(const Tensor&, const Tensor& y, const Tensor& dy, const LayerCache&,
                  bool need_input_grad, std::vector<std::vector<double>>*) const override {
    if (!need_input_grad) return {};
    Tensor dx(y.shape);
    const int n = y.batch();
    const std::size_t c = y.stride();
    for (int s = 0; s < n; ++s) {
      const double* yp = y.sample(s);
      const double* g = dy.sample(s);
      double dot = 0.0;
      for (std::size_t k = 0; k < c; ++k) dot += yp[k] * g[k];
      double* d = dx.sample(s);
      for (std::size_t k = 0; k < c; ++k) d[k] = yp[k] * (g[k] - dot);
    }
    return dx;
  }
};

}  // namespace

std::unique_ptr<Layer> make_conv2d(int in_channels, int out_channels, int kernel, Rng& rng) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("conv2d needs positive channel counts and an odd kernel");
  }
  auto l = std::make_unique<Conv2d>(in_channels, out_channels, kernel);
  const double limit = std::sqrt(6.0 / (in_channels * kernel * kernel));
  l->params()[0] = uniform_param("weight", {out_channels, in_channels, kernel, kernel}, limit, rng);
  return l;
}

std::unique_ptr<Layer> make_batch_norm(int channels, double momentum, double epsilon) {
  if (channels < 1) throw ConfigError("batch_norm needs at least one channel");
  return std::make_unique<BatchNorm>(channels, momentum, epsilon);
}

std::unique_ptr<Layer> make_max_pool(int size) {
  if (size < 1) throw ConfigError("max_pool size must be positive");
  return std::make_unique<MaxPool>(size);
}

std::unique_ptr<Layer> make_global_avg_pool() { return std::make_unique<GlobalAvgPool>(); }

std::unique_ptr<Layer> make_dense(int in, int out, Rng& rng, double gain) {
  if (in < 1 || out < 1) throw ConfigError("dense needs positive input and output widths");
  auto l = std::make_unique<Dense>(in, out);
  l->params()[0] = uniform_param("weight", {out, in}, std::sqrt(gain / in), rng);
  return l;
}

std::unique_ptr<Layer> make_dropout(double rate) { return std::make_unique<Dropout>(rate); }
std::unique_ptr<Layer> make_arelu(double alpha, double beta) { return std::make_unique<Arelu>(alpha, beta); }
std::unique_ptr<Layer> make_relu() { return std::make_unique<Relu>(); }
std::unique_ptr<Layer> make_softmax() { return std::make_unique<Softmax>(); }

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  auto need = [&](std::size_t ints, std::size_t reals) {
    if (spec.ints.size() != ints || spec.reals.size() != reals) {
      throw DataError("malformed " + to_string(spec.kind) + " layer record");
    }
  };
  std::unique_ptr<Layer> l;
  try {
    switch (spec.kind) {
      case LayerKind::kConv2d:
        need(3, 0);
        if (spec.ints[0] < 1 || spec.ints[1] < 1 || spec.ints[2] < 1 || spec.ints[2] % 2 == 0) {
          throw DataError("malformed conv2d layer record");
        }
        l = std::make_unique<Conv2d>(static_cast<int>(spec.ints[0]), static_cast<int>(spec.ints[1]),
                                     static_cast<int>(spec.ints[2]));
        break;
      case LayerKind::kBatchNorm:
        need(1, 2);
        l = make_batch_norm(static_cast<int>(spec.ints[0]), spec.reals[0], spec.reals[1]);
        break;
      case LayerKind::kMaxPool:
        need(1, 0);
        l = make_max_pool(static_cast<int>(spec.ints[0]));
        break;
      case LayerKind::kGlobalAvgPool:
        need(0, 0);
        l = make_global_avg_pool();
        break;
      case LayerKind::kDense:
        need(2, 0);
        if (spec.ints[0] < 1 || spec.ints[1] < 1) throw DataError("malformed dense layer record");
        l = std::make_unique<Dense>(static_cast<int>(spec.ints[0]), static_cast<int>(spec.ints[1]));
        break;
      case LayerKind::kDropout:
        need(0, 1);
        l = make_dropout(spec.reals[0]);
        break;
      case LayerKind::kArelu:
        need(0, 0);
        l = make_arelu();
        break;
      case LayerKind::kRelu:
        need(0, 0);
        l = make_relu();
        break;
      case LayerKind::kSoftmax:
        need(0, 0);
        l = make_softmax();
        break;
      default:
        throw DataError("unknown layer kind " + std::to_string(static_cast<int>(spec.kind)));
    }
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed layer record: ") + e.what());
  }
  l->frozen = spec.frozen;
  l->concat_from = spec.concat_from;
  return l;
}

}  // namespace dslite::nn
