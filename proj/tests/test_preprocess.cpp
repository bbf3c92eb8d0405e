#include "stsad/error.hpp"
#include "stsad/preprocess.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace stsad;

namespace {

Schema one_channel(ChannelKind kind, bool smooth = false) {
  Schema s;
  s.channels = {{"c", kind, smooth}};
  s.statuses = {{"sto", StatusRole::Fault}};
  return s;
}

DayTrace day_of(const Eigen::VectorXd& column) {
  DayTrace d;
  d.values = DayMatrix(column.size(), 1);
  d.values.col(0) = column;
  return d;
}

}  // namespace

TEST(FitNormalizer, ConstantZNormChannelIsDegenerate) {
  const DayTrace d = day_of(Eigen::VectorXd::Constant(kMinutesPerDay, 5.0));
  EXPECT_THROW(fit_normalizer({d}, one_channel(ChannelKind::ZNorm), {}), DegenerateChannelError);
}

TEST(FitNormalizer, MinMaxEndpointsMapInsideUnitInterval) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kMinutesPerDay);
  v.tail(kMinutesPerDay / 2).setConstant(10.0);
  const NormStats s = fit_normalizer({day_of(v)}, one_channel(ChannelKind::MinMax), {});
  const DayMatrix n = apply_normalizer(day_of(v).values, s);
  const double eps = kMinMaxWidening / (1.0 + 2.0 * kMinMaxWidening);
  EXPECT_NEAR(n(0, 0), eps, 1e-15);
  EXPECT_NEAR(n(kMinutesPerDay - 1, 0), 1.0 - eps, 1e-15);
  EXPECT_GT(n(0, 0), 0.0);
  EXPECT_LT(n(kMinutesPerDay - 1, 0), 1.0);
}

TEST(FitNormalizer, ZNormUsesPooledMeanAndPopulationStd) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(4.0, 2.0);
  Eigen::VectorXd a(kMinutesPerDay), b(kMinutesPerDay);
  for (int i = 0; i < kMinutesPerDay; ++i) {
    a(i) = nd(rng);
    b(i) = nd(rng) + 3.0;
  }
  const NormStats s = fit_normalizer({day_of(a), day_of(b)}, one_channel(ChannelKind::ZNorm), {});
  long double sum = 0;
  for (int i = 0; i < kMinutesPerDay; ++i) sum += static_cast<long double>(a(i)) + b(i);
  const double mean = static_cast<double>(sum / (2 * kMinutesPerDay));
  long double sq = 0;
  for (int i = 0; i < kMinutesPerDay; ++i) sq += std::pow(a(i) - mean, 2) + std::pow(b(i) - mean, 2);
  EXPECT_NEAR(s.norms[0].offset, mean, 1e-12);
  EXPECT_NEAR(s.norms[0].scale, std::sqrt(static_cast<double>(sq / (2 * kMinutesPerDay))), 1e-12);
}

TEST(ApplyNormalizer, MeanInputMapsToZeroAndConstantsSurviveSmoothing) {
  NormStats s;
  s.channels = {"z", "m"};
  s.norms = {{ChannelKind::ZNorm, 3.0, 2.0, false}, {ChannelKind::MinMax, 1.0, 4.0, true}};
  DayMatrix x(kMinutesPerDay, 2);
  x.col(0).setConstant(3.0);
  x.col(1).setConstant(2.0);
  const DayMatrix n = apply_normalizer(x, s);
  EXPECT_EQ(n.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR((n.col(1).array() - 0.25).abs().maxCoeff(), 0.0, 1e-15);
  const DayMatrix back = invert_normalizer(n, s);
  EXPECT_NEAR((back - x).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(GaussianSmooth, WindowOneIsIdentity) {
  const std::vector<double> x{1, 5, -2, 8};
  EXPECT_EQ(gaussian_smooth(x, 1, 1.0), x);
}

TEST(GaussianSmooth, ImpulseGivesKernel) {
  std::vector<double> x(kMinutesPerDay, 0.0);
  x[720] = 1.0;
  const double sigma = 2.5;
  const std::vector<double> y = gaussian_smooth(x, 15, sigma);
  double total = 0;
  for (double v : y) total += v;
  EXPECT_NEAR(total, 1.0, 1e-9);
  double norm = 0;
  for (int j = -7; j <= 7; ++j) norm += std::exp(-0.5 * j * j / (sigma * sigma));
  for (int j = -7; j <= 7; ++j) {
    EXPECT_NEAR(y[720 + j], std::exp(-0.5 * j * j / (sigma * sigma)) / norm, 1e-15);
    EXPECT_EQ(y[720 + j], y[720 - j]);
  }
  EXPECT_EQ(y[712], 0.0);
}

TEST(GaussianSmooth, ConstantSeriesUnchanged) {
  const std::vector<double> x(100, 3.25);
  for (double v : gaussian_smooth(x, 15, 2.5)) EXPECT_NEAR(v, 3.25, 1e-14);
  EXPECT_THROW(gaussian_smooth(x, 4, 1.0), ParameterError);
}

TEST(Tokenize, SmallCaseAndShape) {
  DayMatrix x(4, 1);
  x << 1, 2, 3, 4;
  const TokenMatrix t = tokenize(x, {2, 64});
  ASSERT_EQ(t.rows(), 2);
  EXPECT_EQ(t(0, 0), 1);
  EXPECT_EQ(t(0, 1), 2);
  EXPECT_EQ(t(1, 0), 3);
  EXPECT_EQ(t(1, 1), 4);
  EXPECT_EQ(detokenize(t, {2, 64}, 1), x);

  EXPECT_EQ(tokenize(DayMatrix::Zero(kMinutesPerDay, 8), {}).rows(), 48);
  EXPECT_EQ(detokenize(TokenMatrix::Zero(48, 240), {}, 8), DayMatrix::Zero(kMinutesPerDay, 8));
  EXPECT_THROW(tokenize(DayMatrix::Zero(100, 1), {30, 64}), ShapeError);
}

TEST(Tokenize, RandomRoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    DayMatrix x(kMinutesPerDay, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    EXPECT_EQ(detokenize(tokenize(x, {}), {}, 8), x);
  }
}

TEST(NormStats, TextRoundTrip) {
  NormStats s;
  s.channels = {"a", "b"};
  s.norms = {{ChannelKind::ZNorm, 0.1, 3.0, false}, {ChannelKind::MinMax, -1.0, 2.5, true}};
  const NormStats back = NormStats::from_text(s.to_text());
  ASSERT_EQ(back.channels, s.channels);
  EXPECT_EQ(back.norms[1].offset, -1.0);
  EXPECT_TRUE(back.norms[1].smooth);
  EXPECT_THROW(NormStats::from_text("{"), CheckpointError);
}
