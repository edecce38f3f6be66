#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhan/layers.hpp"
#include "mhan/tensor.hpp"

namespace mhan {

enum class OptimizerKind { Sgd, Adam };

inline const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

inline OptimizerKind optimizer_from_name(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer: " + s);
}

// SGD / Adam over an explicit tensor list. Adam keeps exactly one moment pair
// per distinct tensor identity, so a tensor shared across languages is stepped
// once with one set of moments.
class Optimizer {
 public:
  static Optimizer sgd(double lr, double clip_norm = 0.0) {
    Optimizer o;
    o.kind_ = OptimizerKind::Sgd;
    o.lr_ = lr;
    o.clip_norm_ = clip_norm;
    return o;
  }

  static Optimizer adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8, double clip_norm = 0.0) {
    Optimizer o;
    o.kind_ = OptimizerKind::Adam;
    o.lr_ = lr;
    o.beta1_ = beta1;
    o.beta2_ = beta2;
    o.eps_ = eps;
    o.clip_norm_ = clip_norm;
    return o;
  }

  OptimizerKind kind() const { return kind_; }
  std::size_t moment_pairs() const { return state_.size(); }

  void zero_grad(const NamedTensors& params) {
    for (const auto& [name, t] : params) t->zero_grad();
  }

  void step(const NamedTensors& params) {
    if (clip_norm_ > 0.0) clip_gradients(params);
    switch (kind_) {
      case OptimizerKind::Sgd:
        for (const auto& [name, t] : params) {
          auto& w = t->values();
          const auto& g = t->grad();
          for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
        }
        break;
      case OptimizerKind::Adam: {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (const auto& [name, t] : params) {
          Moments& m = state_[t.get()];
          if (m.m.empty()) {
            m.m.assign(t->size(), 0.0);
            m.v.assign(t->size(), 0.0);
          }
          auto& w = t->values();
          const auto& g = t->grad();
          for (std::size_t i = 0; i < w.size(); ++i) {
            m.m[i] = beta1_ * m.m[i] + (1.0 - beta1_) * g[i];
            m.v[i] = beta2_ * m.v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m.m[i] / bc1;
            const double vhat = m.v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
          }
        }
        break;
      }
    }
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };

  void clip_gradients(const NamedTensors& params) {
    double sq = 0.0;
    for (const auto& [name, t] : params)
      for (double g : t->grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm_) return;
    const double scale = clip_norm_ / norm;
    for (const auto& [name, t] : params)
      for (double& g : t->grad()) g *= scale;
  }

  OptimizerKind kind_ = OptimizerKind::Adam;
  double lr_ = 1e-3;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  double clip_norm_ = 0.0;  // 0 disables clipping
  std::uint64_t t_ = 0;
  std::unordered_map<Tensor*, Moments> state_;
};

}  // namespace mhan
