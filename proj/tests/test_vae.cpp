#include "stsad/error.hpp"
#include "stsad/vae.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace stsad;
using M = Mat<double>;

namespace {

TrainConfig toy_config(OutputKind output = OutputKind::Heteroscedastic) {
  TrainConfig c;
  c.num_layers = 2;
  c.hidden_dim = 5;
  c.latent_dim = 3;
  c.token_length = 2;
  c.dropout = 0.0;
  c.output = output;
  return c;
}

// Two tokens of length 2 over 3 channels.
constexpr int kToyT = 4;
constexpr int kToyF = 3;

M random_matrix(Eigen::Index r, Eigen::Index c, nn::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

std::vector<M*> tensors(VaeParams<double>& p) {
  std::vector<M*> out;
  visit_tensors(p, [&out](const std::string&, M& m) { out.push_back(&m); });
  return out;
}

// Batched loss whose var^beta_l weight is frozen at `weight`, so finite
// differences see the same objective the analytic gradient differentiates.
double frozen_loss(const VaeBatchCache<double>& cache, const M& weight, const LossSettings& loss) {
  const auto x = cache.input.array();
  const auto mu = cache.out_mu.array();
  const auto var = cache.out_var.array();
  double recon = 0.0;
  if (loss.output == OutputKind::Heteroscedastic) {
    recon = (weight.array() * (0.5 * (var.log() + (x - mu).square() / var) + kHalfLog2Pi)).sum() /
            static_cast<double>(x.size());
  } else {
    recon = (x - mu).square().sum() / static_cast<double>(x.size());
  }
  const auto lm = cache.latent_mu.array();
  const auto lv = cache.latent_var.array();
  const double kl = 0.5 * (lm.square() + lv - lv.log() - 1.0).sum() / static_cast<double>(cache.batch);
  return recon + loss.beta * kl;
}

void check_full_gradient(OutputKind output, double beta_l, int batch) {
  nn::Rng rng(21);
  TrainConfig cfg = toy_config(output);
  cfg.beta = 0.3;
  cfg.beta_l = beta_l;
  const ModelShape shape = ModelShape::from(cfg, kToyF, kToyT);
  VaeParams<double> params = VaeParams<double>::init(shape, rng);
  const M input = random_matrix(shape.token_width(), shape.tokens * batch, rng);
  const M noise = random_matrix(shape.latent, shape.tokens * batch, rng);
  const LossSettings loss = LossSettings::from(cfg);

  VaeBatchCache<double> cache;
  vae_forward(params, shape, input, batch, &noise, {cfg.variance_floor, {}}, cache);
  const M weight = beta_l == 0.0 ? M::Ones(cache.out_var.rows(), cache.out_var.cols())
                                 : M(cache.out_var.array().pow(beta_l).matrix());
  auto ptrs = tensors(params);
  nn::LossWithGradient fn = [&](std::vector<M>* grads) {
    VaeBatchCache<double> c;
    vae_forward(params, shape, input, batch, &noise, {cfg.variance_floor, {}}, c);
    if (grads) {
      VaeParams<double> g = VaeParams<double>::zeros(shape);
      vae_backward(params, shape, c, loss, g);
      auto gp = tensors(g);
      for (std::size_t i = 0; i < gp.size(); ++i) (*grads)[i] = *gp[i];
    }
    return frozen_loss(c, weight, loss);
  };
  const auto r = nn::grad_check(fn, ptrs, 300, rng);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

}  // namespace

TEST(LossIdentities, GaussianNllAtMean) {
  DayMatrix x = DayMatrix::Random(6, 2);
  GaussianField g{x, DayMatrix::Ones(6, 2)};
  const DayMatrix nll = gaussian_nll(x, g);
  EXPECT_NEAR((nll.array() - 0.5 * std::log(2 * M_PI)).abs().maxCoeff(), 0.0, 1e-12);
  g.mu.array() += 1.0;
  EXPECT_NEAR(gaussian_nll(x, g)(0, 0), 0.5 + 0.5 * std::log(2 * M_PI), 1e-12);
}

TEST(LossIdentities, NllMinusScaledSquaredErrorIsConstant) {
  DayMatrix mu = DayMatrix::Zero(1, 5);
  DayMatrix var = DayMatrix::Constant(1, 5, 2.5);
  DayMatrix x(1, 5);
  x << -3, -1, 0, 0.5, 4;
  const DayMatrix nll = gaussian_nll(x, {mu, var});
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(nll(0, i) - x(0, i) * x(0, i) / (2 * 2.5), nll(0, 2), 1e-12);
  }
}

TEST(LossIdentities, BnllReducesToNllAndScalesByVariance) {
  nn::Rng rng(4);
  DayMatrix x = random_matrix(10, 3, rng);
  DayMatrix mu = random_matrix(10, 3, rng);
  DayMatrix var = random_matrix(10, 3, rng).array().exp().matrix();
  const GaussianField g{mu, var};
  EXPECT_NEAR(bnll_loss(x, g, 0.0), gaussian_nll(x, g).mean(), 1e-12);

  const GaussianField four{mu, DayMatrix::Constant(10, 3, 4.0)};
  EXPECT_NEAR(bnll_loss(x, four, 0.5), 2.0 * gaussian_nll(x, four).mean(), 1e-12);
  EXPECT_THROW(bnll_loss(x, g, 1.5), ParameterError);
}

TEST(LossIdentities, BnllBetaOneWithUnitVarianceHasMseGradient) {
  // d/dmu of mean(1^1 * nll) = (mu - x) / count.
  DayMatrix x(1, 4);
  x << 1, 2, 3, 4;
  DayMatrix mu = DayMatrix::Zero(1, 4);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    DayMatrix up = mu, down = mu;
    up(0, i) += h;
    down(0, i) -= h;
    const double numeric = (bnll_loss(x, {up, DayMatrix::Ones(1, 4)}, 1.0) -
                            bnll_loss(x, {down, DayMatrix::Ones(1, 4)}, 1.0)) /
                           (2 * h);
    EXPECT_NEAR(numeric, (mu(0, i) - x(0, i)) / 4.0, 1e-8);
  }
}

TEST(LossIdentities, KlValues) {
  LatentField l{M::Zero(4, 3), M::Ones(4, 3), {}};
  EXPECT_EQ(kl_divergence(l), 0.0);
  LatentField one{M::Ones(1, 1), M::Ones(1, 1), {}};
  EXPECT_NEAR(kl_divergence(one), 0.5, 1e-15);
}

TEST(LossIdentities, KlMatchesQuadrature) {
  const double mu = 0.7, var = 0.4;
  LatentField l{M::Constant(1, 1, mu), M::Constant(1, 1, var), {}};
  // KL(q || p) = integral q log(q / p), trapezoid on [-12, 12].
  double integral = 0;
  const double dx = 1e-4;
  for (double x = -12; x <= 12; x += dx) {
    const double lq = -0.5 * std::log(2 * M_PI * var) - (x - mu) * (x - mu) / (2 * var);
    const double lp = -0.5 * std::log(2 * M_PI) - x * x / 2;
    integral += std::exp(lq) * (lq - lp) * dx;
  }
  EXPECT_NEAR(kl_divergence(l), integral, 1e-4);
  EXPECT_GE(kl_divergence(l), 0.0);
}

TEST(Vae, ZeroParametersGiveZeroMeansAndConstantVariance) {
  const TrainConfig cfg = toy_config();
  const ModelShape shape = ModelShape::from(cfg, kToyF, kToyT);
  const VaeParams<double> zero = VaeParams<double>::zeros(shape);
  nn::Rng rng(1);
  const TokenMatrix tokens = random_matrix(shape.tokens, shape.token_width(), rng);
  const LatentField l = encode(tokens, zero, shape);
  EXPECT_EQ(l.mu.cwiseAbs().maxCoeff(), 0.0);
  const double expected = std::log(2.0) + cfg.variance_floor;
  EXPECT_NEAR((l.var.array() - expected).abs().maxCoeff(), 0.0, 1e-15);

  const GaussianField g = decode(M::Zero(shape.tokens, shape.latent), zero, shape);
  EXPECT_EQ(g.mu.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR((g.var.array() - expected).abs().maxCoeff(), 0.0, 1e-15);
  EXPECT_THROW(decode(M::Zero(shape.tokens + 1, shape.latent), zero, shape), ShapeError);
}

TEST(Vae, EncodeIsOrderSensitiveAndVariancePositive) {
  nn::Rng rng(2);
  const TrainConfig cfg = toy_config();
  const ModelShape shape = ModelShape::from(cfg, kToyF, kToyT);
  const VaeParams<double> p = VaeParams<double>::init(shape, rng);
  const TokenMatrix tokens = random_matrix(shape.tokens, shape.token_width(), rng, 3.0);
  const TokenMatrix reversed = tokens.colwise().reverse();
  const LatentField a = encode(tokens, p, shape);
  const LatentField b = encode(reversed, p, shape);
  EXPECT_GT((a.mu - b.mu.colwise().reverse()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(a.var.minCoeff(), 0.0);
  const GaussianField g = decode(random_matrix(shape.tokens, shape.latent, rng, 10.0), p, shape);
  EXPECT_GT(g.var.minCoeff(), 0.0);
}

TEST(Vae, DecodeIsDeterministic) {
  nn::Rng rng(3);
  const ModelShape shape = ModelShape::from(toy_config(), kToyF, kToyT);
  const VaeParams<double> p = VaeParams<double>::init(shape, rng);
  const M z = random_matrix(shape.tokens, shape.latent, rng);
  const GaussianField a = decode(z, p, shape);
  const GaussianField b = decode(z, p, shape);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.var, b.var);
}

TEST(Vae, ReparamSample) {
  LatentField l{M::Constant(2, 2, 1.5), M::Constant(2, 2, 0.25), {}};
  EXPECT_EQ(reparam_sample(l, M::Zero(2, 2)), l.mu);
  LatentField tiny{M::Zero(1, 1), M::Constant(1, 1, 1e-6), {}};
  EXPECT_LE(std::abs(reparam_sample(tiny, M::Constant(1, 1, 2.0))(0, 0)), std::sqrt(1e-6) * 2.0 + 1e-15);

  nn::Rng rng(9);
  std::normal_distribution<double> nd;
  LatentField one{M::Constant(1, 1, 0.8), M::Constant(1, 1, 2.0), {}};
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += reparam_sample(one, M::Constant(1, 1, nd(rng)))(0, 0);
  EXPECT_NEAR(sum / n, 0.8, 3.0 * std::sqrt(2.0 / n));
}

TEST(Vae, LossTermsAtPerfectReconstruction) {
  nn::Rng rng(6);
  TrainConfig cfg = toy_config();
  cfg.beta = 0.0;
  const ModelShape shape = ModelShape::from(cfg, kToyF, kToyT);
  const VaeParams<double> p = VaeParams<double>::init(shape, rng);
  const DayMatrix x = random_matrix(kToyT, kToyF, rng);
  const LossTerms t = vae_loss(x, p, shape, cfg, random_matrix(shape.tokens, shape.latent, rng));
  EXPECT_EQ(t.total, t.recon);
}

TEST(GradCheck, FullVaeHeteroscedastic) { check_full_gradient(OutputKind::Heteroscedastic, 0.5, 1); }
TEST(GradCheck, FullVaeHeteroscedasticPlainNll) { check_full_gradient(OutputKind::Heteroscedastic, 0.0, 2); }
TEST(GradCheck, FullVaeHomoscedastic) { check_full_gradient(OutputKind::Homoscedastic, 0.5, 2); }

TEST(TrainConfig, TextRoundTripAndValidation) {
  TrainConfig c = TrainConfig::desk_profile();
  c.seed = 99;
  c.output = OutputKind::Homoscedastic;
  const TrainConfig back = TrainConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(TrainConfig::paper_profile().update_steps, 40000);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Checkpoint, RoundTripAndVersionCheck) {
  nn::Rng rng(10);
  ModelCheckpoint ck;
  ck.config = toy_config(OutputKind::Homoscedastic);
  ck.norm.channels = {"a", "b", "c"};
  ck.norm.norms.assign(3, {ChannelKind::ZNorm, 0.0, 1.0, false});
  ck.shape = ModelShape::from(ck.config, kToyF);
  ck.params = VaeParams<float>::init(ck.shape, rng);
  ErrorScaler s;
  s.location = DayMatrix::Constant(kMinutesPerDay, 3, 0.5);
  s.scale = DayMatrix::Constant(kMinutesPerDay, 3, 2.0);
  ck.error_scaler = s;

  std::stringstream io;
  ck.write(io);
  const std::string bytes = io.str();
  const ModelCheckpoint back = ModelCheckpoint::read(io);
  EXPECT_EQ(back.params.mlp_out.weight, ck.params.mlp_out.weight);
  EXPECT_EQ(back.params.encoder.layers[1].w_hidden, ck.params.encoder.layers[1].w_hidden);
  ASSERT_TRUE(back.error_scaler.has_value());
  EXPECT_EQ(back.error_scaler->scale(5, 1), 2.0);

  std::string bumped = bytes;
  bumped[8] = 9;  // version field follows the 8 magic bytes
  std::istringstream bad(bumped);
  EXPECT_THROW(ModelCheckpoint::read(bad), CheckpointError);
}

TEST(Train, RecoversFromDataAndIsDeterministic) {
  TrainConfig cfg = toy_config();
  cfg.token_length = 30;
  cfg.hidden_dim = 8;
  cfg.update_steps = 50;
  cfg.batch_size = 4;
  cfg.learning_rate = 3e-3;
  cfg.log_every = 50;
  NormStats norm;
  norm.channels = {"a", "b"};
  norm.norms.assign(2, {ChannelKind::ZNorm, 0.0, 1.0, false});
  DayTrace day;
  day.values = DayMatrix(kMinutesPerDay, 2);
  for (int t = 0; t < kMinutesPerDay; ++t) {
    day.values(t, 0) = std::sin(t / 100.0);
    day.values(t, 1) = std::cos(t / 70.0);
  }
  const TrainResult a = train({day}, {day}, norm, cfg);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(a.log[0].step, 0);
  EXPECT_EQ(a.log[1].step, 50);
  EXPECT_LT(a.log[1].train_recon, a.log[0].train_recon);
  const TrainResult b = train({day}, {day}, norm, cfg);
  EXPECT_EQ(a.log.back().train_total, b.log.back().train_total);
  EXPECT_EQ(a.checkpoint.params.mlp_out.weight, b.checkpoint.params.mlp_out.weight);

  const GaussianField r1 = reconstruct(day, a.checkpoint);
  const GaussianField r2 = reconstruct(day, a.checkpoint);
  EXPECT_EQ(r1.mu, r2.mu);
  ReconstructOptions sampled{LatentMode::Sampled, 1, 5};
  EXPECT_EQ(reconstruct(day, a.checkpoint, sampled).mu, reconstruct(day, a.checkpoint, sampled).mu);
  ReconstructOptions many{LatentMode::Sampled, 64, 5};
  EXPECT_LT((reconstruct(day, a.checkpoint, many).mu - r1.mu).cwiseAbs().mean(), 0.1);

  EXPECT_THROW(train({}, {}, norm, cfg), ParameterError);
}

TEST(TrainLog, CsvColumns) {
  std::ostringstream out;
  write_train_log(out, {{0, 1.0, 0.9, 10.0, 1.1, 1.2}});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "step,train_total,train_recon,train_kl,val_total");
}
