#include "stsad/error.hpp"
#include "stsad/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stsad;
using namespace stsad::nn;
using M = Mat<double>;

namespace {

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> nd;
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

}  // namespace

TEST(Linear, IdentityAndBias) {
  Linear<double> l{M::Identity(3, 3), M::Zero(3, 1)};
  Rng rng(1);
  const M x = random_matrix(3, 5, rng);
  EXPECT_EQ(linear_forward(l, x), x);
  Linear<double> b{M::Zero(2, 3), M(2, 1)};
  b.bias << 1.5, -2;
  const M y = linear_forward(b, x);
  for (Eigen::Index j = 0; j < 5; ++j) {
    EXPECT_EQ(y(0, j), 1.5);
    EXPECT_EQ(y(1, j), -2);
  }
  EXPECT_THROW(linear_forward(l, random_matrix(2, 2, rng)), ShapeError);
}

TEST(Linear, MatchesTripleLoop) {
  Rng rng(2);
  Linear<double> l{random_matrix(3, 2, rng), random_matrix(3, 1, rng)};
  const M x = random_matrix(2, 4, rng);
  const M y = linear_forward(l, x);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = l.bias(i, 0);
      for (int k = 0; k < 2; ++k) acc += l.weight(i, k) * x(k, j);
      EXPECT_NEAR(y(i, j), acc, 1e-14);
    }
}

TEST(LstmStep, ZeroWeightsGiveZeroState) {
  LstmLayer<double> layer{M::Zero(8, 3), M::Zero(8, 2), M::Zero(8, 1)};
  const auto r = lstm_step<double>(M::Ones(3, 1), M::Zero(2, 1), M::Zero(2, 1), layer);
  EXPECT_EQ(r.h.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LstmStep, SaturatedForgetGateKeepsCell) {
  LstmLayer<double> layer{M::Zero(8, 3), M::Zero(8, 2), M::Zero(8, 1)};
  layer.bias.block(2, 0, 2, 1).setConstant(30.0);   // forget gate
  layer.bias.block(0, 0, 2, 1).setConstant(-30.0);  // input gate closed
  M c_prev(2, 1);
  c_prev << 0.7, -1.3;
  const auto r = lstm_step<double>(M::Ones(3, 1), M::Zero(2, 1), c_prev, layer);
  EXPECT_NEAR((r.c - c_prev).cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

TEST(LstmStep, SingleUnitHandComputation) {
  LstmLayer<double> layer{M(4, 1), M(4, 1), M(4, 1)};
  layer.w_input << 0.5, -0.25, 1.0, 0.75;
  layer.w_hidden << 0.1, 0.2, -0.3, 0.4;
  layer.bias << 0.0, 1.0, 0.0, -0.5;
  const double x = 0.8, h = 0.3, c = -0.6;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(0.5 * x + 0.1 * h);
  const double f = sig(-0.25 * x + 0.2 * h + 1.0);
  const double g = std::tanh(1.0 * x - 0.3 * h);
  const double o = sig(0.75 * x + 0.4 * h - 0.5);
  const double c_next = f * c + i * g;
  const auto r = lstm_step<double>(M::Constant(1, 1, x), M::Constant(1, 1, h), M::Constant(1, 1, c), layer);
  EXPECT_NEAR(r.c(0, 0), c_next, 1e-15);
  EXPECT_NEAR(r.h(0, 0), o * std::tanh(c_next), 1e-15);
}

TEST(Dropout, IdentityCasesAndSurvivorFraction) {
  Rng rng(5);
  const M x = random_matrix(10, 10, rng);
  EXPECT_EQ(dropout(x, 0.0, rng, true), x);
  EXPECT_EQ(dropout(x, 0.5, rng, false), x);
  EXPECT_THROW(dropout(x, 1.0, rng, true), ParameterError);
  const M mask = dropout_mask<double>(1000, 1000, 0.1, rng);
  const double survivors = (mask.array() != 0.0).cast<double>().mean();
  EXPECT_NEAR(survivors, 0.9, 0.003);
  EXPECT_NEAR(mask.maxCoeff(), 1.0 / 0.9, 1e-15);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  M p(1, 3);
  p << 1.0, 2.0, 3.0;
  M g(1, 3);
  g << 0.5, -3.0, 0.0;
  Adam<double> adam({0.01});
  const M before = p;
  adam.step({&p}, {&g});
  EXPECT_NEAR(p(0, 0) - before(0, 0), -0.01, 1e-6);
  EXPECT_NEAR(p(0, 1) - before(0, 1), 0.01, 1e-6);
  EXPECT_EQ(p(0, 2), before(0, 2));
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, DescendsQuadraticAndRejectsNonFinite) {
  M p = M::Constant(1, 1, 4.0);
  Adam<double> adam({0.1});
  double prev = p(0, 0) * p(0, 0);
  for (int i = 0; i < 2; ++i) {
    const M g = 2.0 * p;
    adam.step({&p}, {&g});
    const double loss = p(0, 0) * p(0, 0);
    EXPECT_LT(loss, prev);
    prev = loss;
  }
  const M bad = M::Constant(1, 1, std::nan(""));
  EXPECT_THROW(adam.step({&p}, {&bad}), OptimizerError);
}

TEST(GradCheck, LinearSumLoss) {
  Rng rng(7);
  Linear<double> l{random_matrix(4, 3, rng), random_matrix(4, 1, rng)};
  const M x = random_matrix(3, 6, rng);
  LossWithGradient loss = [&](std::vector<M>* grads) {
    const M y = linear_forward(l, x);
    if (grads) {
      Linear<double> g{M::Zero(4, 3), M::Zero(4, 1)};
      linear_backward(l, x, M(M::Ones(4, 6)), g);
      (*grads)[0] = g.weight;
      (*grads)[1] = g.bias;
    }
    return y.sum();
  };
  const auto r = grad_check(loss, {&l.weight, &l.bias}, 40, rng);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST(GradCheck, LstmSequenceSquaredLoss) {
  Rng rng(8);
  LstmLayer<double> layer = make_lstm_layer<double>(3, 4, rng);
  const M x = random_matrix(3, 2 * 5, rng);  // 5 steps, batch 2
  const M target = random_matrix(4, 10, rng);
  LossWithGradient loss = [&](std::vector<M>* grads) {
    LstmCache<double> cache;
    const M h = lstm_forward(layer, x, 2, cache);
    const M diff = h - target;
    if (grads) {
      LstmLayer<double> g{M::Zero(16, 3), M::Zero(16, 4), M::Zero(16, 1)};
      lstm_backward(layer, cache, diff, g);
      (*grads)[0] = g.w_input;
      (*grads)[1] = g.w_hidden;
      (*grads)[2] = g.bias;
    }
    return 0.5 * diff.squaredNorm();
  };
  const auto r = grad_check(loss, {&layer.w_input, &layer.w_hidden, &layer.bias}, 100, rng);
  EXPECT_LT(r.max_relative_error, 1e-4);
}
