#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "volreg/autonet/labels.hpp"
#include "volreg/autonet/layers.hpp"
#include "volreg/autonet/nadam.hpp"

using namespace volreg;
using namespace volreg::autonet;

TEST(BatchNorm, TrainModeNormalizesEachChannel) {
  Rng rng(3);
  const auto x = oracle::random_tensor<double>({4, 2, 3, 3, 3}, rng, -2, 5);
  BatchNormState<double> st{{0, 0}, {1, 1}};
  const auto y = batchnorm_forward<double>(x, {2.0, 0.5}, {1.0, -1.0}, st, Mode::Train);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, sq = 0, xs = 0, xsq = 0;
    const double count = 4 * 27;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 27; ++i) {
        const double v = y[(n * 2 + c) * 27 + i], u = x[(n * 2 + c) * 27 + i];
        s += v;
        sq += v * v;
        xs += u;
        xsq += u * u;
      }
    const double mean = s / count, var = sq / count - mean * mean;
    const double xmean = xs / count, xvar = xsq / count - xmean * xmean;
    const double gamma = c == 0 ? 2.0 : 0.5, beta = c == 0 ? 1.0 : -1.0;
    EXPECT_NEAR(mean, beta, 1e-12);
    EXPECT_NEAR(var, gamma * gamma * xvar / (xvar + kBatchNormEpsilon), 1e-10);
    EXPECT_NEAR(st.running_mean[c], 0.1 * xmean, 1e-12);
    EXPECT_NEAR(st.running_var[c], 0.9 + 0.1 * xvar * count / (count - 1), 1e-12);
  }
}

TEST(BatchNorm, InferModeUsesRunningStatistics) {
  const Tensor64 x({1, 1, 2}, {3.0, 5.0});
  BatchNormState<double> st{{1.0}, {4.0}};
  const auto y = batchnorm_forward<double>(x, {2.0}, {0.5}, st, Mode::Infer);
  const double inv = 1.0 / std::sqrt(4.0 + 1e-5);
  EXPECT_DOUBLE_EQ(y[0], 2.0 * 2.0 * inv + 0.5);
  EXPECT_DOUBLE_EQ(y[1], 4.0 * 2.0 * inv + 0.5);
  EXPECT_EQ(st.running_mean[0], 1.0);
}

TEST(BatchNorm, NoStatsUpdateWhenDisabled) {
  Rng rng(4);
  const auto x = oracle::random_tensor<double>({2, 1, 4}, rng);
  BatchNormState<double> st{{0.25}, {2.0}};
  batchnorm_forward<double>(x, {1.0}, {0.0}, st, Mode::Train, nullptr, false);
  EXPECT_EQ(st.running_mean[0], 0.25);
  EXPECT_EQ(st.running_var[0], 2.0);
}

TEST(BatchNorm, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const auto x = oracle::random_tensor<double>({3, 2, 5}, rng);
  const auto g = oracle::random_tensor<double>({3, 2, 5}, rng);
  const std::vector<double> gamma{1.3, 0.7}, beta{0.1, -0.2};
  const auto loss = [&](const Tensor64& in, const std::vector<double>& gm, const std::vector<double>& bt) {
    BatchNormState<double> st{{0, 0}, {1, 1}};
    const auto y = batchnorm_forward<double>(in, gm, bt, st, Mode::Train);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * g[i];
    return s;
  };
  BatchNormState<double> st{{0, 0}, {1, 1}};
  BatchNormCache<double> cache;
  batchnorm_forward<double>(x, gamma, beta, st, Mode::Train, &cache);
  const auto grads = batchnorm_backward(g, cache, gamma);
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor64 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    EXPECT_NEAR(grads.grad_input[i], (loss(xp, gamma, beta) - loss(xm, gamma, beta)) / (2 * h), 1e-7);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    auto gp = gamma, gm = gamma, bp = beta, bm = beta;
    gp[c] += h;
    gm[c] -= h;
    bp[c] += h;
    bm[c] -= h;
    EXPECT_NEAR(grads.grad_gamma[c], (loss(x, gp, beta) - loss(x, gm, beta)) / (2 * h), 1e-7);
    EXPECT_NEAR(grads.grad_beta[c], (loss(x, gamma, bp) - loss(x, gamma, bm)) / (2 * h), 1e-7);
  }
}

TEST(BatchNorm, ChannelCountMismatchThrows) {
  BatchNormState<float> st{{0}, {1}};
  EXPECT_THROW(batchnorm_forward<float>(Tensor({1, 2, 2}), {1, 1}, {0, 0}, st, Mode::Train), InvalidArgument);
}

TEST(Relu, ClampsNegatives) {
  Tensor t({4}, {-1.0f, 0.0f, 2.0f, -0.5f});
  relu_inplace(t);
  EXPECT_EQ(t, Tensor({4}, {0.0f, 0.0f, 2.0f, 0.0f}));
}

TEST(Dropout, InferAndZeroRateAreIdentity) {
  Rng rng(1);
  const auto x = oracle::random_tensor<float>({2, 3, 4}, rng);
  EXPECT_EQ(spatial_dropout3d(x, 0.5, Mode::Infer, nullptr), x);
  EXPECT_EQ(spatial_dropout3d(x, 0.0, Mode::Train, &rng), x);
  EXPECT_THROW(spatial_dropout3d(x, 1.0, Mode::Train, &rng), InvalidArgument);
  EXPECT_THROW(spatial_dropout3d(x, 0.2, Mode::Train, nullptr), InvalidArgument);
}

TEST(Dropout, WholeMapsDroppedAtBinomialRate) {
  Rng rng(2);
  const Tensor x({100, 100, 3}, 1.0f);
  std::vector<float> scale;
  const Tensor y = spatial_dropout3d(x, 0.2, Mode::Train, &rng, &scale);
  std::size_t dropped = 0;
  for (std::size_t m = 0; m < 10000; ++m) {
    const float a = y[3 * m], b = y[3 * m + 1], c = y[3 * m + 2];
    EXPECT_EQ(a, b);
    EXPECT_EQ(b, c);
    EXPECT_EQ(a, scale[m]);
    if (a == 0.0f) {
      ++dropped;
    } else {
      EXPECT_FLOAT_EQ(a, 1.25f);
    }
  }
  // binomial(10000, 0.2): sd 40
  EXPECT_NEAR(static_cast<double>(dropped), 2000.0, 160.0);
}

TEST(Head, HandComputedExample) {
  // two channels of two voxels: means 2 and -1
  const Tensor64 f({1, 2, 2}, {1.0, 3.0, -2.0, 0.0});
  const Tensor64 w({2, 2}, {0.5, 1.0, 0.25, -2.0});
  const Tensor64 b({2}, {0.1, 0.0});
  const auto h = gap_head_forward(f, w, b);
  EXPECT_DOUBLE_EQ(h.pooled(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(h.pooled(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(h.activation(0, 0), 0.5 * 2 + 0.25 * -1 + 0.1);
  EXPECT_DOUBLE_EQ(h.activation(0, 1), 1.0 * 2 + -2.0 * -1);
  EXPECT_DOUBLE_EQ(h.output(0, 1), std::tanh(4.0));
}

TEST(Labels, EncodeEndpoints) {
  const auto a = encode_labels(100, 5);
  EXPECT_DOUBLE_EQ(a.vfi, 1.0);
  EXPECT_DOUBLE_EQ(a.md, 1.0);
  const auto b = encode_labels(0, -35);
  EXPECT_DOUBLE_EQ(b.vfi, -1.0);
  EXPECT_DOUBLE_EQ(b.md, -1.0);
  const auto c = encode_labels(50, -15);
  EXPECT_DOUBLE_EQ(c.vfi, 0.0);
  EXPECT_DOUBLE_EQ(c.md, 0.0);
}

TEST(Labels, OutOfRangeIsClipped) {
  const auto e = encode_labels(140, -50);
  EXPECT_DOUBLE_EQ(e.vfi, 1.0);
  EXPECT_DOUBLE_EQ(e.md, -1.0);
  const auto d = decode_labels(1.5, -3);
  EXPECT_DOUBLE_EQ(d.vfi, 100.0);
  EXPECT_DOUBLE_EQ(d.md, -35.0);
}

TEST(Labels, RoundTrip) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double vfi = rng.uniform(0, 100), md = rng.uniform(-35, 5);
    const auto e = encode_labels(vfi, md);
    const auto d = decode_labels(e.vfi, e.md);
    EXPECT_NEAR(d.vfi, vfi, 1e-12);
    EXPECT_NEAR(d.md, md, 1e-12);
  }
}

TEST(Nadam, FirstStepHandEvaluated) {
  Tensor64 p({1}, {1.0});
  const Tensor64 g({1}, {0.5});
  NadamState<double> st;
  nadam_step<double>({{"p", &p, &g}}, st, 1, 0.1);
  // m = 0.05, v = 0.00025; m_hat = 0.9*0.05/0.19 + 0.1*0.5/0.1; v_hat = 0.25
  const double m_hat = 0.045 / 0.19 + 0.5;
  EXPECT_NEAR(p[0], 1.0 - 0.1 * m_hat / (0.5 + 1e-8), 1e-15);
  EXPECT_DOUBLE_EQ(st.m[0][0], 0.05);
  EXPECT_NEAR(st.v[0][0], 0.00025, 1e-18);
}

TEST(Nadam, SecondStepHandEvaluated) {
  Tensor64 p({1}, {0.0});
  const Tensor64 g1({1}, {1.0}), g2({1}, {-2.0});
  NadamState<double> st;
  nadam_step<double>({{"p", &p, &g1}}, st, 1, 0.01);
  const double after1 = p[0];
  nadam_step<double>({{"p", &p, &g2}}, st, 2, 0.01);
  const double m = 0.9 * 0.1 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 + 0.001 * 4.0;
  const double m_hat = 0.9 * m / (1 - std::pow(0.9, 3)) + 0.1 * -2.0 / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], after1 - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Nadam, ZeroLearningRateLeavesParameters) {
  Rng rng(7);
  Tensor64 p = oracle::random_tensor<double>({5}, rng);
  const Tensor64 before = p;
  const Tensor64 g = oracle::random_tensor<double>({5}, rng);
  NadamState<double> st;
  for (std::size_t t = 1; t <= 3; ++t) nadam_step<double>({{"p", &p, &g}}, st, t, 0.0);
  EXPECT_EQ(p, before);
}

TEST(Nadam, NonFiniteGradientRejectedAtomically) {
  Tensor64 a({1}, {1.0}), b({1}, {2.0});
  const Tensor64 ga({1}, {0.5}), gb({1}, {std::nan("")});
  NadamState<double> st;
  EXPECT_THROW(nadam_step<double>({{"a", &a, &ga}, {"b", &b, &gb}}, st, 1, 0.1), InvalidArgument);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(b[0], 2.0);
  EXPECT_THROW(nadam_step<double>({{"a", &a, &ga}}, st, 0, 0.1), InvalidArgument);
}
