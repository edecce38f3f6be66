#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mhan/rng.hpp"
#include "mhan/tensor.hpp"

namespace mhan {

enum class EncoderKind { Dense, Gru, BiGru };

inline const char* encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::Dense: return "dense";
    case EncoderKind::Gru: return "gru";
    case EncoderKind::BiGru: return "bigru";
  }
  return "?";
}

inline EncoderKind encoder_from_name(const std::string& s) {
  if (s == "dense") return EncoderKind::Dense;
  if (s == "gru") return EncoderKind::Gru;
  if (s == "bigru") return EncoderKind::BiGru;
  throw std::invalid_argument("unknown encoder kind: " + s);
}

using NamedTensors = std::vector<std::pair<std::string, TensorPtr>>;

// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
inline TensorPtr glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor::make({rows, cols}, std::move(v), true);
}

inline TensorPtr glorot_vector(std::size_t n, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor::make({n}, std::move(v), true);
}

inline TensorPtr zero_bias(std::size_t n) { return Tensor::zeros({n}, true); }

struct GruGates {
  TensorPtr Wz, Wr, Wh;  // input_dim x hidden_dim
  TensorPtr Uz, Ur, Uh;  // hidden_dim x hidden_dim
  TensorPtr bz, br, bh;

  static GruGates create(std::size_t d_in, std::size_t d_h, Rng& rng) {
    GruGates p;
    p.Wz = glorot_matrix(d_in, d_h, rng);
    p.Wr = glorot_matrix(d_in, d_h, rng);
    p.Wh = glorot_matrix(d_in, d_h, rng);
    p.Uz = glorot_matrix(d_h, d_h, rng);
    p.Ur = glorot_matrix(d_h, d_h, rng);
    p.Uh = glorot_matrix(d_h, d_h, rng);
    p.bz = zero_bias(d_h);
    p.br = zero_bias(d_h);
    p.bh = zero_bias(d_h);
    return p;
  }

  void append_named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + "/Wz", Wz);
    out.emplace_back(prefix + "/Wr", Wr);
    out.emplace_back(prefix + "/Wh", Wh);
    out.emplace_back(prefix + "/Uz", Uz);
    out.emplace_back(prefix + "/Ur", Ur);
    out.emplace_back(prefix + "/Uh", Uh);
    out.emplace_back(prefix + "/bz", bz);
    out.emplace_back(prefix + "/br", br);
    out.emplace_back(prefix + "/bh", bh);
  }
};

struct EncoderParams {
  EncoderKind kind = EncoderKind::Dense;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Act activation = Act::Relu;  // Dense path only; GRU gates are sigmoid/tanh

  TensorPtr W, b;       // Dense
  GruGates fwd, bwd;    // Gru uses fwd; BiGru uses both

  std::size_t output_dim() const {
    return kind == EncoderKind::BiGru ? 2 * hidden_dim : hidden_dim;
  }

  static EncoderParams create(EncoderKind kind, std::size_t d_in, std::size_t d_h, Rng& rng,
                              Act activation = Act::Relu) {
    if (d_in == 0 || d_h == 0)
      throw std::invalid_argument("encoder: dims must be positive");
    EncoderParams p;
    p.kind = kind;
    p.input_dim = d_in;
    p.hidden_dim = d_h;
    p.activation = activation;
    switch (kind) {
      case EncoderKind::Dense:
        p.W = glorot_matrix(d_in, d_h, rng);
        p.b = zero_bias(d_h);
        break;
      case EncoderKind::Gru:
        p.fwd = GruGates::create(d_in, d_h, rng);
        break;
      case EncoderKind::BiGru:
        p.fwd = GruGates::create(d_in, d_h, rng);
        p.bwd = GruGates::create(d_in, d_h, rng);
        break;
    }
    return p;
  }

  NamedTensors named(const std::string& prefix) const {
    NamedTensors out;
    switch (kind) {
      case EncoderKind::Dense:
        out.emplace_back(prefix + "/W", W);
        out.emplace_back(prefix + "/b", b);
        break;
      case EncoderKind::Gru:
        fwd.append_named(out, prefix + "/fwd");
        break;
      case EncoderKind::BiGru:
        fwd.append_named(out, prefix + "/fwd");
        bwd.append_named(out, prefix + "/bwd");
        break;
    }
    return out;
  }
};

struct AttentionParams {
  TensorPtr W;  // enc_out x d_a
  TensorPtr b;  // d_a
  TensorPtr u;  // d_a context vector
  Act activation = Act::Relu;

  static AttentionParams create(std::size_t enc_out, std::size_t d_a, Rng& rng,
                                Act activation = Act::Relu) {
    AttentionParams p;
    p.W = glorot_matrix(enc_out, d_a, rng);
    p.b = zero_bias(d_a);
    p.u = glorot_vector(d_a, d_a, 1, rng);
    p.activation = activation;
    return p;
  }

  NamedTensors named(const std::string& prefix) const {
    return {{prefix + "/W", W}, {prefix + "/b", b}, {prefix + "/u", u}};
  }
};

struct ClassifierParams {
  TensorPtr W;  // d_doc x k
  TensorPtr b;  // k

  static ClassifierParams create(std::size_t d_doc, std::size_t k, Rng& rng) {
    ClassifierParams p;
    p.W = glorot_matrix(d_doc, k, rng);
    p.b = zero_bias(k);
    return p;
  }

  NamedTensors named(const std::string& prefix) const {
    return {{prefix + "/W", W}, {prefix + "/b", b}};
  }
};

// Number of valid positions; padding must be a suffix.
inline std::size_t prefix_length(const Mask& mask) {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  for (std::size_t i = n; i < mask.size(); ++i)
    if (mask[i])
      throw std::invalid_argument("mask: valid position " + std::to_string(i) +
                                  " follows padding (non-prefix mask)");
  return n;
}

inline Mask full_mask(std::size_t n) { return Mask(n, 1); }

// Position-independent encoder: relu(x_t W + b) at every position.
inline std::vector<TensorPtr> dense_encode(Graph& g, const std::vector<TensorPtr>& x_seq,
                                           const EncoderParams& p) {
  if (p.kind != EncoderKind::Dense)
    throw std::invalid_argument("dense_encode: params are " + std::string(encoder_name(p.kind)));
  std::vector<TensorPtr> out;
  out.reserve(x_seq.size());
  for (const auto& x : x_seq)
    out.push_back(g.activation(g.add(g.vecmat(x, p.W), p.b), p.activation));
  return out;
}

namespace detail {

inline TensorPtr gru_step(Graph& g, const GruGates& p, const TensorPtr& x, const TensorPtr& h) {
  auto z = g.activation(g.add(g.add(g.vecmat(x, p.Wz), g.vecmat(h, p.Uz)), p.bz), Act::Sigmoid);
  auto r = g.activation(g.add(g.add(g.vecmat(x, p.Wr), g.vecmat(h, p.Ur)), p.br), Act::Sigmoid);
  auto cand =
      g.activation(g.add(g.add(g.vecmat(x, p.Wh), g.vecmat(g.mul(r, h), p.Uh)), p.bh), Act::Tanh);
  // h = (1-z) (.) h_prev + z (.) cand
  return g.add(g.mul(g.scale_shift(z, -1.0, 1.0), h), g.mul(z, cand));
}

}  // namespace detail

// h_t = GRU(x_t, h_{t-1}), h_0 = 0; padded steps carry h_{t-1} through.
inline std::vector<TensorPtr> gru_encode(Graph& g, const std::vector<TensorPtr>& x_seq,
                                         const EncoderParams& p, const Mask& mask) {
  if (p.kind != EncoderKind::Gru)
    throw std::invalid_argument("gru_encode: params are " + std::string(encoder_name(p.kind)));
  if (mask.size() != x_seq.size())
    throw std::invalid_argument("gru_encode: mask length " + std::to_string(mask.size()) +
                                " vs sequence length " + std::to_string(x_seq.size()));
  const std::size_t t_eff = prefix_length(mask);
  TensorPtr h = Tensor::zeros({p.hidden_dim});
  std::vector<TensorPtr> out;
  out.reserve(x_seq.size());
  for (std::size_t t = 0; t < x_seq.size(); ++t) {
    if (t < t_eff) h = detail::gru_step(g, p.fwd, x_seq[t], h);
    out.push_back(h);
  }
  return out;
}

// Concatenation [forward_h_t ; backward_h_t]; the backward direction runs over
// the reversed valid prefix, so padded positions carry a zero backward half.
inline std::vector<TensorPtr> bigru_encode(Graph& g, const std::vector<TensorPtr>& x_seq,
                                           const EncoderParams& p, const Mask& mask) {
  if (p.kind != EncoderKind::BiGru)
    throw std::invalid_argument("bigru_encode: params are " + std::string(encoder_name(p.kind)));
  if (mask.size() != x_seq.size())
    throw std::invalid_argument("bigru_encode: mask length " + std::to_string(mask.size()) +
                                " vs sequence length " + std::to_string(x_seq.size()));
  const std::size_t t_eff = prefix_length(mask);
  const TensorPtr h0 = Tensor::zeros({p.hidden_dim});

  std::vector<TensorPtr> fwd_out(x_seq.size());
  TensorPtr h = h0;
  for (std::size_t t = 0; t < x_seq.size(); ++t) {
    if (t < t_eff) h = detail::gru_step(g, p.fwd, x_seq[t], h);
    fwd_out[t] = h;
  }

  std::vector<TensorPtr> bwd_out(x_seq.size(), h0);
  h = h0;
  for (std::size_t i = 0; i < t_eff; ++i) {
    const std::size_t t = t_eff - 1 - i;
    h = detail::gru_step(g, p.bwd, x_seq[t], h);
    bwd_out[t] = h;
  }

  std::vector<TensorPtr> out;
  out.reserve(x_seq.size());
  for (std::size_t t = 0; t < x_seq.size(); ++t) out.push_back(g.concat(fwd_out[t], bwd_out[t]));
  return out;
}

inline std::vector<TensorPtr> encode(Graph& g, const std::vector<TensorPtr>& x_seq,
                                     const EncoderParams& p, const Mask& mask) {
  switch (p.kind) {
    case EncoderKind::Dense: return dense_encode(g, x_seq, p);
    case EncoderKind::Gru: return gru_encode(g, x_seq, p, mask);
    case EncoderKind::BiGru: return bigru_encode(g, x_seq, p, mask);
  }
  throw std::logic_error("encode: unreachable");
}

struct PoolResult {
  TensorPtr pooled;
  TensorPtr alpha;  // softmax weights over positions; zero at padding
};

// Attention pooling: alpha from a one-layer scoring network against the
// context vector, combined as sum_t alpha_t h_t. With strict_paper_scaling the
// sum carries the literal 1/T factor, T being the effective length.
inline PoolResult attention_pool(Graph& g, const std::vector<TensorPtr>& h_seq,
                                 const AttentionParams& a, const Mask& mask,
                                 bool strict_paper_scaling) {
  if (mask.size() != h_seq.size())
    throw std::invalid_argument("attention_pool: mask length " + std::to_string(mask.size()) +
                                " vs sequence length " + std::to_string(h_seq.size()));
  const std::size_t t_eff = prefix_length(mask);
  if (t_eff == 0) throw std::invalid_argument("attention_pool: empty sequence");
  std::vector<TensorPtr> logits;
  logits.reserve(h_seq.size());
  for (std::size_t t = 0; t < h_seq.size(); ++t) {
    if (mask[t]) {
      auto v = g.activation(g.add(g.vecmat(h_seq[t], a.W), a.b), a.activation);
      logits.push_back(g.dot(v, a.u));
    } else {
      logits.push_back(Tensor::scalar(0.0));  // excluded by the mask
    }
  }
  auto alpha = g.masked_softmax(g.concat_scalars(logits), mask);
  auto pooled = g.weighted_sum(alpha, h_seq);
  if (strict_paper_scaling)
    pooled = g.scale_shift(pooled, 1.0 / static_cast<double>(t_eff), 0.0);
  return {pooled, alpha};
}

// Arithmetic mean over valid positions.
inline TensorPtr average_pool(Graph& g, const std::vector<TensorPtr>& h_seq, const Mask& mask) {
  if (mask.size() != h_seq.size())
    throw std::invalid_argument("average_pool: mask length " + std::to_string(mask.size()) +
                                " vs sequence length " + std::to_string(h_seq.size()));
  const std::size_t t_eff = prefix_length(mask);
  if (t_eff == 0) throw std::invalid_argument("average_pool: empty sequence");
  std::vector<double> w(h_seq.size(), 0.0);
  for (std::size_t t = 0; t < t_eff; ++t) w[t] = 1.0 / static_cast<double>(t_eff);
  return g.weighted_sum(Tensor::make({h_seq.size()}, std::move(w)), h_seq);
}

// Independent per-label probabilities: sigmoid(W_c^T u + b_c).
inline TensorPtr classify(Graph& g, const TensorPtr& u, const ClassifierParams& c) {
  return g.activation(g.add(g.vecmat(u, c.W), c.b), Act::Sigmoid);
}

inline TensorPtr bce_loss(Graph& g, const std::vector<double>& gold, const TensorPtr& yhat) {
  for (double v : gold)
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("bce_loss: gold labels must be 0/1");
  return g.bce(yhat, gold);
}

}  // namespace mhan
