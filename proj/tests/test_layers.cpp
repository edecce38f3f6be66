#include "mhan/layers.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "mhan/gradcheck.hpp"
#include "test_util.hpp"

using namespace mhan;
using namespace mhan::test;

namespace {

EncoderParams dense_params(TensorPtr W, TensorPtr b) {
  EncoderParams p;
  p.kind = EncoderKind::Dense;
  p.input_dim = W->rows();
  p.hidden_dim = W->cols();
  p.W = std::move(W);
  p.b = std::move(b);
  return p;
}

EncoderParams zero_gru(std::size_t d_in, std::size_t d_h, EncoderKind kind = EncoderKind::Gru) {
  EncoderParams p;
  p.kind = kind;
  p.input_dim = d_in;
  p.hidden_dim = d_h;
  auto zeros_gates = [&] {
    GruGates gg;
    gg.Wz = Tensor::zeros({d_in, d_h}, true);
    gg.Wr = Tensor::zeros({d_in, d_h}, true);
    gg.Wh = Tensor::zeros({d_in, d_h}, true);
    gg.Uz = Tensor::zeros({d_h, d_h}, true);
    gg.Ur = Tensor::zeros({d_h, d_h}, true);
    gg.Uh = Tensor::zeros({d_h, d_h}, true);
    gg.bz = Tensor::zeros({d_h}, true);
    gg.br = Tensor::zeros({d_h}, true);
    gg.bh = Tensor::zeros({d_h}, true);
    return gg;
  };
  p.fwd = zeros_gates();
  if (kind == EncoderKind::BiGru) p.bwd = zeros_gates();
  return p;
}

std::vector<TensorPtr> seq(const std::vector<std::vector<double>>& rows) {
  std::vector<TensorPtr> out;
  for (const auto& r : rows) out.push_back(Tensor::make({r.size()}, r));
  return out;
}

}  // namespace

TEST(DenseEncode, ReluOfIdentityMap) {
  Graph g;
  auto p = dense_params(tensor({2, 2}, {1, 0, 0, 1}, true), tensor({2}, {0, 0}, true));
  auto out = dense_encode(g, seq({{1, -1}}), p);
  expect_vec_near(out[0]->values(), {1, 0}, 0.0);
}

TEST(DenseEncode, ZeroMapGivesZeros) {
  Graph g;
  auto p = dense_params(Tensor::zeros({2, 3}, true), Tensor::zeros({3}, true));
  auto out = dense_encode(g, seq({{0.7, -2.0}, {5.0, 1.0}}), p);
  expect_vec_near(out[0]->values(), {0, 0, 0}, 0.0);
  expect_vec_near(out[1]->values(), {0, 0, 0}, 0.0);
}

TEST(DenseEncode, HandAffine) {
  Graph g;
  auto p = dense_params(tensor({2, 1}, {1, 1}, true), tensor({1}, {0.5}, true));
  auto out = dense_encode(g, seq({{1, 2}}), p);
  expect_vec_near(out[0]->values(), {3.5}, 1e-15);
}

TEST(DenseEncode, RejectsWrongKind) {
  Graph g;
  auto p = zero_gru(2, 2);
  EXPECT_THROW(dense_encode(g, seq({{1, 2}}), p), std::invalid_argument);
}

TEST(GruEncode, AllZeroParamsStayZero) {
  Graph g;
  auto p = zero_gru(2, 3);
  auto out = gru_encode(g, seq({{1, 2}, {-1, 0.5}}), p, Mask{1, 1});
  expect_vec_near(out[0]->values(), {0, 0, 0}, 0.0);
  expect_vec_near(out[1]->values(), {0, 0, 0}, 0.0);
}

TEST(GruEncode, ZeroEffectiveLengthKeepsInitialState) {
  Graph g;
  auto p = zero_gru(2, 3);
  auto out = gru_encode(g, seq({{1, 2}, {3, 4}}), p, Mask{0, 0});
  expect_vec_near(out[0]->values(), {0, 0, 0}, 0.0);
  expect_vec_near(out[1]->values(), {0, 0, 0}, 0.0);
}

TEST(GruEncode, UpdateGateLimit) {
  // z -> 1 makes h_1 -> tanh(W_h x) = tanh(0.5).
  auto p = zero_gru(1, 1);
  p.fwd.bz = tensor({1}, {20.0}, true);
  p.fwd.Wh = tensor({1, 1}, {1.0}, true);
  Graph g;
  auto out = gru_encode(g, seq({{0.5}}), p, Mask{1});
  EXPECT_NEAR(out[0]->scalar_value(), std::tanh(0.5), 1e-6);
}

TEST(GruEncode, NonPrefixMaskRejected) {
  Graph g;
  auto p = zero_gru(2, 2);
  EXPECT_THROW(gru_encode(g, seq({{1, 2}, {3, 4}, {5, 6}}), p, Mask{1, 0, 1}),
               std::invalid_argument);
}

TEST(GruEncode, TrailingPaddingMatchesTruncated) {
  Rng rng(11, "gru-pad");
  auto p = EncoderParams::create(EncoderKind::Gru, 3, 4, rng);
  auto x3 = seq({rand_vec(rng, 3), rand_vec(rng, 3), rand_vec(rng, 3)});
  auto x5 = x3;
  x5.push_back(Tensor::zeros({3}));
  x5.push_back(Tensor::zeros({3}));
  Graph g1, g2;
  auto padded = gru_encode(g1, x5, p, Mask{1, 1, 1, 0, 0});
  auto truncated = gru_encode(g2, x3, p, Mask{1, 1, 1});
  for (std::size_t t = 0; t < 3; ++t)
    expect_vec_near(padded[t]->values(), truncated[t]->values(), 0.0);
}

TEST(BigruEncode, ZeroParamsGiveDoubleWidthZeros) {
  Graph g;
  auto p = zero_gru(2, 3, EncoderKind::BiGru);
  auto out = bigru_encode(g, seq({{1, 2}, {3, 4}}), p, Mask{1, 1});
  EXPECT_EQ(out[0]->size(), 6u);
  expect_vec_near(out[0]->values(), {0, 0, 0, 0, 0, 0}, 0.0);
}

TEST(BigruEncode, PalindromeWithTiedDirectionsIsSymmetric) {
  Rng rng(5, "bigru-pal");
  auto p = EncoderParams::create(EncoderKind::BiGru, 2, 3, rng);
  p.bwd = p.fwd;  // tie directions
  auto a = rand_vec(rng, 2);
  auto b = rand_vec(rng, 2);
  auto x = seq({a, b, a});
  Graph g;
  auto out = bigru_encode(g, x, p, Mask{1, 1, 1});
  const std::size_t T = 3, dh = 3;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < dh; ++j) {
      EXPECT_NEAR(out[t]->values()[j], out[T - 1 - t]->values()[dh + j], 1e-14);
      EXPECT_NEAR(out[t]->values()[dh + j], out[T - 1 - t]->values()[j], 1e-14);
    }
}

TEST(BigruEncode, ForwardHalfOccupiesLowIndices) {
  Rng rng(6, "bigru-order");
  auto p = EncoderParams::create(EncoderKind::BiGru, 2, 3, rng);
  auto x = seq({rand_vec(rng, 2), rand_vec(rng, 2), rand_vec(rng, 2), rand_vec(rng, 2)});
  Mask mask{1, 1, 1, 0};

  EncoderParams fwd_only;
  fwd_only.kind = EncoderKind::Gru;
  fwd_only.input_dim = 2;
  fwd_only.hidden_dim = 3;
  fwd_only.fwd = p.fwd;
  EncoderParams bwd_only = fwd_only;
  bwd_only.fwd = p.bwd;

  Graph g;
  auto out = bigru_encode(g, x, p, mask);
  auto f = gru_encode(g, x, fwd_only, mask);
  std::vector<TensorPtr> rev{x[2], x[1], x[0]};
  auto brev = gru_encode(g, rev, bwd_only, Mask{1, 1, 1});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(out[t]->values()[j], f[t]->values()[j]);
      EXPECT_DOUBLE_EQ(out[t]->values()[3 + j], brev[2 - t]->values()[j]);
    }
  // padded position: forward half carried, backward half zero
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(out[3]->values()[j], f[2]->values()[j]);
    EXPECT_DOUBLE_EQ(out[3]->values()[3 + j], 0.0);
  }
}

TEST(AttentionPool, SinglePositionIsIdentityUnderEitherScaling) {
  Rng rng(3, "att-single");
  auto a = AttentionParams::create(4, 3, rng);
  auto h = seq({rand_vec(rng, 4)});
  for (bool strict : {true, false}) {
    Graph g;
    auto r = attention_pool(g, h, a, Mask{1}, strict);
    expect_vec_near(r.pooled->values(), h[0]->values(), 1e-15);
    expect_vec_near(r.alpha->values(), {1.0}, 1e-15);
  }
}

TEST(AttentionPool, UniformLogitsStrictScaling) {
  Rng rng(4, "att-uniform");
  AttentionParams a;
  a.W = Tensor::zeros({2, 3}, true);  // uniform scores regardless of input
  a.b = Tensor::zeros({3}, true);
  a.u = tensor({3}, rand_vec(rng, 3), true);
  auto h = seq({{2, 0}, {0, 2}});
  Graph g;
  auto strict = attention_pool(g, h, a, Mask{1, 1}, true);
  expect_vec_near(strict.pooled->values(), {0.5, 0.5}, 1e-15);
  auto plain = attention_pool(g, h, a, Mask{1, 1}, false);
  expect_vec_near(plain.pooled->values(), {1.0, 1.0}, 1e-15);
}

TEST(AttentionPool, AlphaIsDistributionWithZerosAtPadding) {
  Rng rng(9, "att-mask");
  auto a = AttentionParams::create(3, 4, rng);
  auto h = seq({rand_vec(rng, 3), rand_vec(rng, 3), rand_vec(rng, 3), rand_vec(rng, 3)});
  Graph g;
  auto r = attention_pool(g, h, a, Mask{1, 1, 1, 0}, true);
  double total = 0.0;
  for (double v : r.alpha->values()) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(r.alpha->values()[3], 0.0);
}

TEST(AttentionPool, UnscaledUniformAlphaEqualsAveragePool) {
  Rng rng(10, "att-avg");
  AttentionParams a;
  a.W = Tensor::zeros({3, 2}, true);
  a.b = tensor({2}, rand_vec(rng, 2, 0.1, 1.0), true);
  a.u = tensor({2}, rand_vec(rng, 2), true);
  auto h = seq({rand_vec(rng, 3), rand_vec(rng, 3), rand_vec(rng, 3), rand_vec(rng, 3)});
  Mask mask{1, 1, 1, 0};
  Graph g;
  auto att = attention_pool(g, h, a, mask, false);
  auto avg = average_pool(g, h, mask);
  expect_vec_near(att.pooled->values(), avg->values(), 1e-12);
}

TEST(AttentionPool, EmptyMaskRejected) {
  Rng rng(12, "att-empty");
  auto a = AttentionParams::create(3, 2, rng);
  Graph g;
  auto h = seq({rand_vec(rng, 3)});
  EXPECT_THROW(attention_pool(g, h, a, Mask{0}, true), std::invalid_argument);
}

TEST(AveragePool, SingleRowPassesThrough) {
  Graph g;
  auto h = seq({{1.5, -2.0}});
  expect_vec_near(average_pool(g, h, Mask{1})->values(), {1.5, -2.0}, 0.0);
}

TEST(AveragePool, SymmetricMean) {
  Graph g;
  expect_vec_near(average_pool(g, seq({{1, 3}, {3, 1}}), Mask{1, 1})->values(), {2, 2}, 1e-15);
}

TEST(AveragePool, PaddingExcluded) {
  Graph g;
  auto h = seq({{2, 2}, {99, 99}});
  expect_vec_near(average_pool(g, h, Mask{1, 0})->values(), {2, 2}, 0.0);
}

TEST(Classify, ZeroParamsGiveHalf) {
  Graph g;
  ClassifierParams c{Tensor::zeros({3, 4}, true), Tensor::zeros({4}, true)};
  auto yhat = classify(g, tensor({3}, {1, -1, 2}), c);
  expect_vec_near(yhat->values(), {0.5, 0.5, 0.5, 0.5}, 0.0);
}

TEST(Classify, SaturatedNegativeBias) {
  Graph g;
  ClassifierParams c{Tensor::zeros({2, 1}, true), tensor({1}, {-20.0}, true)};
  EXPECT_LT(classify(g, tensor({2}, {0, 0}), c)->scalar_value(), 1e-8);
}

TEST(Classify, HandSigmoid) {
  Graph g;
  ClassifierParams c{tensor({1, 1}, {std::log(3.0)}, true), tensor({1}, {0.0}, true)};
  EXPECT_NEAR(classify(g, tensor({1}, {1.0}), c)->scalar_value(), 0.75, 1e-12);
}

TEST(Classify, OutputsInOpenUnitIntervalAndColumnsIndependent) {
  Rng rng(13, "clf-col");
  auto c = ClassifierParams::create(3, 4, rng);
  auto u = tensor({3}, rand_vec(rng, 3));
  Graph g;
  auto before = classify(g, u, c)->values();
  for (double v : before) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  // perturb column j=2 of W only
  for (std::size_t r = 0; r < 3; ++r) c.W->values()[r * 4 + 2] += 0.5;
  auto after = classify(g, u, c)->values();
  for (std::size_t j = 0; j < 4; ++j) {
    if (j == 2)
      EXPECT_NE(before[j], after[j]);
    else
      EXPECT_DOUBLE_EQ(before[j], after[j]);
  }
}

TEST(BceLoss, SymmetricMidpoint) {
  Graph g;
  auto l = bce_loss(g, {1, 0}, tensor({2}, {0.5, 0.5}));
  EXPECT_NEAR(l->scalar_value(), std::log(2.0), 1e-12);
}

TEST(BceLoss, PerfectPredictionUnderClamp) {
  Graph g;
  auto l = bce_loss(g, {1, 0}, tensor({2}, {1.0 - 1e-7, 1e-7}));
  EXPECT_GE(l->scalar_value(), 0.0);
  EXPECT_LT(l->scalar_value(), 2e-7);
}

TEST(BceLoss, MinusLogQuarter) {
  Graph g;
  auto l = bce_loss(g, {1}, tensor({1}, {0.25}));
  EXPECT_NEAR(l->scalar_value(), std::log(4.0), 1e-12);
}

TEST(BceLoss, RejectsNonBinaryGoldAndLengthMismatch) {
  Graph g;
  EXPECT_THROW(bce_loss(g, {0.5}, tensor({1}, {0.5})), std::invalid_argument);
  EXPECT_THROW(bce_loss(g, {1, 0}, tensor({1}, {0.5})), std::invalid_argument);
}

TEST(BceLoss, NonNegativeAndZeroOnlyAtPerfect) {
  Rng rng(14, "bce-pos");
  for (int i = 0; i < 50; ++i) {
    const double p = rng.uniform(0.01, 0.99);
    Graph g;
    auto l = bce_loss(g, {1}, tensor({1}, {p}));
    EXPECT_GT(l->scalar_value(), 0.0);
  }
}

// Finite-difference checks for every layer, 10 fixed seeds, small shapes.
TEST(LayerGradients, MatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (EncoderKind kind : {EncoderKind::Dense, EncoderKind::Gru, EncoderKind::BiGru}) {
      auto build = [&](int attempt) {
        Rng rng(seed, "layer-fd/" + std::to_string(attempt));
        const std::size_t d_in = 2 + rng.index(3);   // 2..4
        const std::size_t d_h = 2 + rng.index(3);    // 2..4
        const std::size_t d_a = 2 + rng.index(2);    // 2..3
        const std::size_t T = 2 + rng.index(3);      // 2..4
        const std::size_t t_eff = 1 + rng.index(T);  // 1..T
        Mask mask(T, 0);
        for (std::size_t t = 0; t < t_eff; ++t) mask[t] = 1;

        auto x = std::make_shared<std::vector<TensorPtr>>();
        for (std::size_t t = 0; t < T; ++t)
          x->push_back(Tensor::make({d_in}, rand_vec(rng, d_in), true));
        auto enc = std::make_shared<EncoderParams>(EncoderParams::create(kind, d_in, d_h, rng));
        auto att = std::make_shared<AttentionParams>(
            AttentionParams::create(enc->output_dim(), d_a, rng));
        auto clf = std::make_shared<ClassifierParams>(
            ClassifierParams::create(enc->output_dim(), 2, rng));

        GradCheckProblem prob;
        prob.params = enc->named("enc");
        for (auto& nt : att->named("att")) prob.params.push_back(nt);
        for (auto& nt : clf->named("clf")) prob.params.push_back(nt);
        for (std::size_t t = 0; t < T; ++t)
          prob.params.emplace_back("x" + std::to_string(t), (*x)[t]);
        prob.loss = [x, enc, att, clf, mask](Graph& g) {
          auto h = encode(g, *x, *enc, mask);
          auto pooled = attention_pool(g, h, *att, mask, true).pooled;
          auto yhat = classify(g, pooled, *clf);
          return bce_loss(g, {1.0, 0.0}, yhat);
        };
        return prob;
      };
      auto res = grad_check_redraw(build, 1e-4);
      EXPECT_LT(res.max_rel_err, 1e-4) << encoder_name(kind) << " seed " << seed << " worst "
                                       << res.worst_param << "[" << res.worst_index << "]";
    }

    // average pooling path (HNN style)
    {
      auto build = [&](int attempt) {
        Rng rng(seed, "avg-fd/" + std::to_string(attempt));
        auto x = std::make_shared<std::vector<TensorPtr>>();
        for (std::size_t t = 0; t < 3; ++t)
          x->push_back(Tensor::make({3}, rand_vec(rng, 3), true));
        auto enc = std::make_shared<EncoderParams>(
            EncoderParams::create(EncoderKind::Dense, 3, 3, rng));
        auto clf = std::make_shared<ClassifierParams>(ClassifierParams::create(3, 2, rng));
        GradCheckProblem prob;
        prob.params = enc->named("enc");
        for (auto& nt : clf->named("clf")) prob.params.push_back(nt);
        prob.loss = [x, enc, clf](Graph& g) {
          auto h = dense_encode(g, *x, *enc);
          auto pooled = average_pool(g, h, Mask{1, 1, 0});
          return bce_loss(g, {0.0, 1.0}, classify(g, pooled, *clf));
        };
        return prob;
      };
      auto res = grad_check_redraw(build, 1e-4);
      EXPECT_LT(res.max_rel_err, 1e-4) << "avg-pool seed " << seed;
    }
  }
}
