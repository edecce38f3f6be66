#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mhan {

using Shape = std::vector<std::size_t>;
using Mask = std::vector<std::uint8_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor of 64-bit floats with an optional gradient buffer.
// Values are validated to be finite on every public construction path.
class Tensor {
 public:
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : shape_(std::move(shape)), data_(std::move(values)), requires_grad_(requires_grad) {
    if (shape_.empty()) throw std::invalid_argument("tensor: empty shape");
    for (std::size_t e : shape_)
      if (e == 0) throw std::invalid_argument("tensor: zero extent in shape " + shape_str(shape_));
    if (shape_numel(shape_) != data_.size())
      throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " does not match " +
                                  std::to_string(data_.size()) + " values");
    if (requires_grad_) grad_.assign(data_.size(), 0.0);
  }

  static TensorPtr make(Shape shape, std::vector<double> values, bool requires_grad = false) {
    auto t = std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
    t->ensure_finite("tensor");
    return t;
  }

  static TensorPtr zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static TensorPtr scalar(double v, bool requires_grad = false) {
    return make(Shape{1}, {v}, requires_grad);
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t ndim() const { return shape_.size(); }
  bool is_scalar() const { return data_.size() == 1; }
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }

  double scalar_value() const {
    if (!is_scalar())
      throw std::logic_error("tensor: scalar_value on shape " + shape_str(shape_));
    return data_[0];
  }

  bool requires_grad() const { return requires_grad_; }

  std::vector<double>& grad() {
    if (!requires_grad_) throw std::logic_error("tensor: grad requested but not tracked");
    return grad_;
  }
  const std::vector<double>& grad() const {
    if (!requires_grad_) throw std::logic_error("tensor: grad requested but not tracked");
    return grad_;
  }

  void zero_grad() {
    if (requires_grad_) grad_.assign(data_.size(), 0.0);
  }

  void ensure_finite(const char* op) const {
    for (double v : data_)
      if (!std::isfinite(v))
        throw std::runtime_error(std::string(op) + ": non-finite value in result of shape " +
                                 shape_str(shape_));
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

enum class Act { Relu, Sigmoid, Tanh };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::Relu: return "relu";
    case Act::Sigmoid: return "sigmoid";
    case Act::Tanh: return "tanh";
  }
  return "?";
}

// Dynamic tape recorded during one forward pass. Ops append backward closures
// in topological order; backward() replays them in reverse, accumulating into
// every tracked input, so a tensor feeding several branches (or several
// languages) receives the sum of all branch gradients.
//
// A non-recording graph computes forward values only; evaluation passes use
// it to skip tape and gradient-buffer costs.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  std::size_t node_count() const { return tape_.size(); }

  // C[m x p] = A[m x n] * B[n x p]
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2 || a->cols() != b->rows())
      throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->shape()) +
                                  " and " + shape_str(b->shape()));
    const std::size_t m = a->rows(), n = a->cols(), p = b->cols();
    std::vector<double> c(m * p, 0.0);
    const double* av = a->values().data();
    const double* bv = b->values().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double aik = av[i * n + k];
        for (std::size_t j = 0; j < p; ++j) c[i * p + j] += aik * bv[k * p + j];
      }
    TensorPtr out = result({m, p}, std::move(c), tracked(a, b), "matmul");
    if (out->requires_grad())
      record([a, b, out, m, n, p] {
        const std::vector<double>& dc = out->grad();
        if (a->requires_grad()) {
          std::vector<double>& da = a->grad();
          const double* bv = b->values().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              double acc = 0.0;
              for (std::size_t k = 0; k < p; ++k) acc += dc[i * p + k] * bv[j * p + k];
              da[i * n + j] += acc;
            }
        }
        if (b->requires_grad()) {
          std::vector<double>& db = b->grad();
          const double* av = a->values().data();
          for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < p; ++k) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i) acc += av[i * n + j] * dc[i * p + k];
              db[j * p + k] += acc;
            }
        }
      });
    return out;
  }

  // y[p] = x[n] * W[n x p]
  TensorPtr vecmat(const TensorPtr& x, const TensorPtr& w) {
    if (x->ndim() != 1 || w->ndim() != 2 || x->size() != w->rows())
      throw std::invalid_argument("vecmat: incompatible shapes " + shape_str(x->shape()) +
                                  " and " + shape_str(w->shape()));
    const std::size_t n = x->size(), p = w->cols();
    std::vector<double> y(p, 0.0);
    const double* xv = x->values().data();
    const double* wv = w->values().data();
    for (std::size_t j = 0; j < n; ++j) {
      const double xj = xv[j];
      const double* wrow = wv + j * p;
      for (std::size_t k = 0; k < p; ++k) y[k] += xj * wrow[k];
    }
    TensorPtr out = result({p}, std::move(y), tracked(x, w), "vecmat");
    if (out->requires_grad())
      record([x, w, out, n, p] {
        const std::vector<double>& dy = out->grad();
        if (x->requires_grad()) {
          std::vector<double>& dx = x->grad();
          const double* wv = w->values().data();
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            const double* wrow = wv + j * p;
            for (std::size_t k = 0; k < p; ++k) acc += dy[k] * wrow[k];
            dx[j] += acc;
          }
        }
        if (w->requires_grad()) {
          std::vector<double>& dw = w->grad();
          const double* xv = x->values().data();
          for (std::size_t j = 0; j < n; ++j) {
            const double xj = xv[j];
            double* drow = dw.data() + j * p;
            for (std::size_t k = 0; k < p; ++k) drow[k] += xj * dy[k];
          }
        }
      });
    return out;
  }

  TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("add", a, b);
    std::vector<double> y(a->size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->values()[i] + b->values()[i];
    TensorPtr out = result(a->shape(), std::move(y), tracked(a, b), "add");
    if (out->requires_grad())
      record([a, b, out] {
        const std::vector<double>& dy = out->grad();
        if (a->requires_grad()) {
          std::vector<double>& da = a->grad();
          for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
        }
        if (b->requires_grad()) {
          std::vector<double>& db = b->grad();
          for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
        }
      });
    return out;
  }

  // Elementwise product.
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("mul", a, b);
    std::vector<double> y(a->size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->values()[i] * b->values()[i];
    TensorPtr out = result(a->shape(), std::move(y), tracked(a, b), "mul");
    if (out->requires_grad())
      record([a, b, out] {
        const std::vector<double>& dy = out->grad();
        if (a->requires_grad()) {
          std::vector<double>& da = a->grad();
          for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b->values()[i];
        }
        if (b->requires_grad()) {
          std::vector<double>& db = b->grad();
          for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a->values()[i];
        }
      });
    return out;
  }

  // y = m*x + c, elementwise with constants.
  TensorPtr scale_shift(const TensorPtr& x, double m, double c) {
    std::vector<double> y(x->size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = m * x->values()[i] + c;
    TensorPtr out = result(x->shape(), std::move(y), tracked(x), "scale_shift");
    if (out->requires_grad())
      record([x, out, m] {
        const std::vector<double>& dy = out->grad();
        std::vector<double>& dx = x->grad();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += m * dy[i];
      });
    return out;
  }

  TensorPtr activation(const TensorPtr& x, Act kind) {
    x->ensure_finite(act_name(kind));
    std::vector<double> y(x->size());
    switch (kind) {
      case Act::Relu:
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x->values()[i] > 0.0 ? x->values()[i] : 0.0;
        break;
      case Act::Sigmoid:
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x->values()[i]));
        break;
      case Act::Tanh:
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x->values()[i]);
        break;
    }
    TensorPtr out = result(x->shape(), std::move(y), tracked(x), act_name(kind));
    if (out->requires_grad())
      record([x, out, kind] {
        const std::vector<double>& dy = out->grad();
        const std::vector<double>& yv = out->values();
        std::vector<double>& dx = x->grad();
        switch (kind) {
          case Act::Relu:
            for (std::size_t i = 0; i < dy.size(); ++i)
              if (x->values()[i] > 0.0) dx[i] += dy[i];
            break;
          case Act::Sigmoid:
            for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
            break;
          case Act::Tanh:
            for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (1.0 - yv[i] * yv[i]);
            break;
        }
      });
    return out;
  }

  TensorPtr dot(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 1 || b->ndim() != 1 || a->size() != b->size())
      throw std::invalid_argument("dot: incompatible shapes " + shape_str(a->shape()) + " and " +
                                  shape_str(b->shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a->size(); ++i) acc += a->values()[i] * b->values()[i];
    TensorPtr out = result({1}, {acc}, tracked(a, b), "dot");
    if (out->requires_grad())
      record([a, b, out] {
        const double ds = out->grad()[0];
        if (a->requires_grad()) {
          std::vector<double>& da = a->grad();
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += ds * b->values()[i];
        }
        if (b->requires_grad()) {
          std::vector<double>& db = b->grad();
          for (std::size_t i = 0; i < db.size(); ++i) db[i] += ds * a->values()[i];
        }
      });
    return out;
  }

  // [a ; b] for vectors.
  TensorPtr concat(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 1 || b->ndim() != 1)
      throw std::invalid_argument("concat: expects vectors, got " + shape_str(a->shape()) +
                                  " and " + shape_str(b->shape()));
    std::vector<double> y;
    y.reserve(a->size() + b->size());
    y.insert(y.end(), a->values().begin(), a->values().end());
    y.insert(y.end(), b->values().begin(), b->values().end());
    TensorPtr out = result({a->size() + b->size()}, std::move(y), tracked(a, b), "concat");
    if (out->requires_grad())
      record([a, b, out] {
        const std::vector<double>& dy = out->grad();
        if (a->requires_grad()) {
          std::vector<double>& da = a->grad();
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
        }
        if (b->requires_grad()) {
          std::vector<double>& db = b->grad();
          const std::size_t off = a->size();
          for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[off + i];
        }
      });
    return out;
  }

  // Stack scalar tensors into one vector.
  TensorPtr concat_scalars(const std::vector<TensorPtr>& items) {
    if (items.empty()) throw std::invalid_argument("concat_scalars: empty input");
    std::vector<double> y(items.size());
    bool rg = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i]->is_scalar())
        throw std::invalid_argument("concat_scalars: element " + std::to_string(i) +
                                    " has shape " + shape_str(items[i]->shape()));
      y[i] = items[i]->values()[0];
      rg = rg || items[i]->requires_grad();
    }
    TensorPtr out = result({items.size()}, std::move(y), rg, "concat_scalars");
    if (out->requires_grad())
      record([items, out] {
        const std::vector<double>& dy = out->grad();
        for (std::size_t i = 0; i < items.size(); ++i)
          if (items[i]->requires_grad()) items[i]->grad()[0] += dy[i];
      });
    return out;
  }

  // Numerically stable exp-normalize over unmasked positions; masked-out
  // entries are exactly zero in both output and gradient.
  TensorPtr masked_softmax(const TensorPtr& logits, const Mask& mask) {
    if (logits->ndim() != 1)
      throw std::invalid_argument("masked_softmax: expects a vector, got " +
                                  shape_str(logits->shape()));
    if (mask.size() != logits->size())
      throw std::invalid_argument("masked_softmax: mask length " + std::to_string(mask.size()) +
                                  " vs logits " + shape_str(logits->shape()));
    double maxv = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i] && logits->values()[i] > maxv) maxv = logits->values()[i];
    if (!std::isfinite(maxv))
      throw std::invalid_argument("masked_softmax: empty sequence (all positions masked out)");
    std::vector<double> y(logits->size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) {
        y[i] = std::exp(logits->values()[i] - maxv);
        z += y[i];
      }
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) y[i] /= z;
    TensorPtr out = result(logits->shape(), std::move(y), tracked(logits), "masked_softmax");
    if (out->requires_grad())
      record([logits, out, mask] {
        const std::vector<double>& dy = out->grad();
        const std::vector<double>& yv = out->values();
        std::vector<double>& dx = logits->grad();
        double inner = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i)
          if (mask[i]) inner += dy[i] * yv[i];
        for (std::size_t i = 0; i < mask.size(); ++i)
          if (mask[i]) dx[i] += yv[i] * (dy[i] - inner);
      });
    return out;
  }

  // out[d] = sum_i alpha[i] * rows[i][d]
  TensorPtr weighted_sum(const TensorPtr& alpha, const std::vector<TensorPtr>& rows) {
    if (alpha->ndim() != 1 || alpha->size() != rows.size())
      throw std::invalid_argument("weighted_sum: " + std::to_string(rows.size()) +
                                  " rows vs weights " + shape_str(alpha->shape()));
    if (rows.empty()) throw std::invalid_argument("weighted_sum: empty input");
    const std::size_t d = rows[0]->size();
    std::vector<double> y(d, 0.0);
    bool rg = alpha->requires_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i]->ndim() != 1 || rows[i]->size() != d)
        throw std::invalid_argument("weighted_sum: row " + std::to_string(i) + " has shape " +
                                    shape_str(rows[i]->shape()));
      const double a = alpha->values()[i];
      if (a != 0.0)
        for (std::size_t j = 0; j < d; ++j) y[j] += a * rows[i]->values()[j];
      rg = rg || rows[i]->requires_grad();
    }
    TensorPtr out = result({d}, std::move(y), rg, "weighted_sum");
    if (out->requires_grad())
      record([alpha, rows, out, d] {
        const std::vector<double>& dy = out->grad();
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (alpha->requires_grad()) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += dy[j] * rows[i]->values()[j];
            alpha->grad()[i] += acc;
          }
          if (rows[i]->requires_grad()) {
            const double a = alpha->values()[i];
            std::vector<double>& dr = rows[i]->grad();
            for (std::size_t j = 0; j < d; ++j) dr[j] += a * dy[j];
          }
        }
      });
    return out;
  }

  TensorPtr sum(const TensorPtr& x) {
    double acc = 0.0;
    for (double v : x->values()) acc += v;
    TensorPtr out = result({1}, {acc}, tracked(x), "sum");
    if (out->requires_grad())
      record([x, out] {
        const double ds = out->grad()[0];
        std::vector<double>& dx = x->grad();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds;
      });
    return out;
  }

  // Mean binary cross-entropy over the label dimension; predictions clamped
  // to [eps, 1-eps] so a saturated sigmoid cannot produce log(0).
  TensorPtr bce(const TensorPtr& yhat, const std::vector<double>& gold,
                double clamp_eps = 1e-7) {
    if (yhat->ndim() != 1 || yhat->size() != gold.size())
      throw std::invalid_argument("bce: prediction shape " + shape_str(yhat->shape()) + " vs " +
                                  std::to_string(gold.size()) + " gold labels");
    const std::size_t k = gold.size();
    const double lo = clamp_eps, hi = 1.0 - clamp_eps;
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double p = std::min(std::max(yhat->values()[i], lo), hi);
      acc -= gold[i] * std::log(p) + (1.0 - gold[i]) * std::log(1.0 - p);
    }
    TensorPtr out = result({1}, {acc / static_cast<double>(k)}, tracked(yhat), "bce");
    if (out->requires_grad())
      record([yhat, out, gold, lo, hi, k] {
        const double dl = out->grad()[0] / static_cast<double>(k);
        std::vector<double>& dp = yhat->grad();
        for (std::size_t i = 0; i < k; ++i) {
          const double raw = yhat->values()[i];
          if (raw <= lo || raw >= hi) continue;  // clamped: flat
          dp[i] += dl * (raw - gold[i]) / (raw * (1.0 - raw));
        }
      });
    return out;
  }

  // Reverse pass from a scalar loss. Every tracked tensor reachable from the
  // loss gets its grad accumulated; each tape node runs exactly once.
  void backward(const TensorPtr& loss) {
    if (!loss) throw std::invalid_argument("backward: null loss");
    if (!loss->is_scalar())
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(loss->shape()));
    if (!recording_) throw std::logic_error("backward: graph is not recording");
    if (!loss->requires_grad())
      throw std::logic_error("backward: loss is not connected to any tracked tensor");
    loss->grad()[0] += 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

 private:
  static bool tracked(const TensorPtr& a) { return a->requires_grad(); }
  static bool tracked(const TensorPtr& a, const TensorPtr& b) {
    return a->requires_grad() || b->requires_grad();
  }

  static void require_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape() != b->shape())
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->shape()) +
                                  " vs " + shape_str(b->shape()));
  }

  TensorPtr result(Shape shape, std::vector<double> values, bool inputs_tracked, const char* op) {
    auto t = std::make_shared<Tensor>(std::move(shape), std::move(values),
                                      recording_ && inputs_tracked);
    t->ensure_finite(op);
    return t;
  }

  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

  std::vector<std::function<void()>> tape_;
  bool recording_;
};

}  // namespace mhan
