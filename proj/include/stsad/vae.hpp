#pragma once

// Recurrent variational autoencoder over tokenized day traces.
//
// Encoder: tokens (L*F) -> linear embedding (E) -> stacked LSTM -> linear
// head producing a per-token Gaussian latent (mean, variance) of size D.
// Decoder: latent sample -> linear (E) -> stacked LSTM -> one-hidden-layer
// tanh MLP producing mean and variance for every minute and channel of
// the token. The homoscedastic variant drops the variance head (var = 1).

#include "stsad/error.hpp"
#include "stsad/error_scaler.hpp"
#include "stsad/nn.hpp"
#include "stsad/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace stsad {

enum class OutputKind { Heteroscedastic, Homoscedastic };

std::string_view to_string(OutputKind kind);

struct TrainConfig {
  double beta = 0.01;
  double beta_l = 0.5;
  double learning_rate = 1e-4;
  int num_layers = 4;
  int hidden_dim = 64;
  int latent_dim = 8;
  double dropout = 0.1;
  int token_length = 30;
  long update_steps = 40000;
  int batch_size = 64;
  std::uint64_t seed = 0;
  int log_every = 500;
  double variance_floor = 1e-6;
  OutputKind output = OutputKind::Heteroscedastic;

  void validate() const;
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);

  /// Reference hyperparameters (40 000 steps).
  static TrainConfig paper_profile();
  /// Laptop-scale profile used for the synthetic benchmarks.
  static TrainConfig desk_profile();
};

struct ModelShape {
  int features = 8;
  int token_length = 30;
  int tokens = 48;
  int hidden = 64;
  int layers = 4;
  int latent = 8;
  OutputKind output = OutputKind::Heteroscedastic;

  int token_width() const { return features * token_length; }
  int output_rows() const { return output == OutputKind::Heteroscedastic ? 2 * token_width() : token_width(); }

  static ModelShape from(const TrainConfig& cfg, int features, int timesteps = kMinutesPerDay);
};

template <typename S>
struct VaeParams {
  nn::Linear<S> embed;         // L*F -> E
  nn::LstmStack<S> encoder;    // E -> E
  nn::Linear<S> latent_head;   // E -> 2D (mean rows, then variance rows)
  nn::Linear<S> latent_embed;  // D -> E
  nn::LstmStack<S> decoder;    // E -> E
  nn::Linear<S> mlp_hidden;    // E -> E
  nn::Linear<S> mlp_out;       // E -> 2*L*F or L*F

  static VaeParams init(const ModelShape& shape, nn::Rng& rng);
  static VaeParams zeros(const ModelShape& shape);

  template <typename T>
  VaeParams<T> cast() const;
};

/// Calls fn(name, tensor) for every parameter tensor in a fixed order.
template <typename P, typename Fn>
void visit_tensors(P& params, Fn&& fn) {
  auto linear = [&fn](const std::string& prefix, auto& l) {
    fn(prefix + ".weight", l.weight);
    fn(prefix + ".bias", l.bias);
  };
  auto stack = [&fn](const std::string& prefix, auto& s) {
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      const std::string p = prefix + ".layer" + std::to_string(i);
      fn(p + ".w_input", s.layers[i].w_input);
      fn(p + ".w_hidden", s.layers[i].w_hidden);
      fn(p + ".bias", s.layers[i].bias);
    }
  };
  linear("embed", params.embed);
  stack("encoder", params.encoder);
  linear("latent_head", params.latent_head);
  linear("latent_embed", params.latent_embed);
  stack("decoder", params.decoder);
  linear("mlp_hidden", params.mlp_hidden);
  linear("mlp_out", params.mlp_out);
}

template <typename S>
VaeParams<S> VaeParams<S>::init(const ModelShape& shape, nn::Rng& rng) {
  VaeParams p;
  p.embed = nn::make_linear<S>(shape.token_width(), shape.hidden, rng);
  p.encoder = nn::make_lstm_stack<S>(shape.hidden, shape.hidden, shape.layers, rng);
  p.latent_head = nn::make_linear<S>(shape.hidden, 2 * shape.latent, rng);
  p.latent_embed = nn::make_linear<S>(shape.latent, shape.hidden, rng);
  p.decoder = nn::make_lstm_stack<S>(shape.hidden, shape.hidden, shape.layers, rng);
  p.mlp_hidden = nn::make_linear<S>(shape.hidden, shape.hidden, rng);
  p.mlp_out = nn::make_linear<S>(shape.hidden, shape.output_rows(), rng);
  return p;
}

template <typename S>
VaeParams<S> VaeParams<S>::zeros(const ModelShape& shape) {
  nn::Rng rng(0);
  VaeParams p = init(shape, rng);
  visit_tensors(p, [](const std::string&, Mat<S>& m) { m.setZero(); });
  return p;
}

template <typename S>
template <typename T>
VaeParams<T> VaeParams<S>::cast() const {
  VaeParams<T> out;
  auto linear = [](const nn::Linear<S>& l) { return nn::Linear<T>{l.weight.template cast<T>(), l.bias.template cast<T>()}; };
  auto stack = [](const nn::LstmStack<S>& s) {
    nn::LstmStack<T> o;
    for (const auto& l : s.layers) {
      o.layers.push_back({l.w_input.template cast<T>(), l.w_hidden.template cast<T>(), l.bias.template cast<T>()});
    }
    return o;
  };
  out.embed = linear(embed);
  out.encoder = stack(encoder);
  out.latent_head = linear(latent_head);
  out.latent_embed = linear(latent_embed);
  out.decoder = stack(decoder);
  out.mlp_hidden = linear(mlp_hidden);
  out.mlp_out = linear(mlp_out);
  return out;
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

/// softplus(a) + floor.
template <typename Derived>
auto positive_variance(const Eigen::ArrayBase<Derived>& a, typename Derived::Scalar floor) {
  using S = typename Derived::Scalar;
  return a.max(S(0)) + (-a.abs()).exp().log1p() + floor;
}

/// Activations of one batched forward pass; columns are k*B + b.
template <typename S>
struct VaeBatchCache {
  Eigen::Index batch = 0;
  bool sampled = false;
  Mat<S> input;  // L*F x K*B
  Mat<S> embedded;
  nn::LstmStackCache<S> encoder;
  Mat<S> encoded;
  Mat<S> theta;  // 2D x K*B raw head output
  Mat<S> latent_mu;
  Mat<S> latent_var;
  Mat<S> noise;
  Mat<S> z;
  Mat<S> latent_embedded;
  nn::LstmStackCache<S> decoder;
  Mat<S> decoded;
  Mat<S> mlp_act;  // tanh hidden layer
  Mat<S> out_raw;
  Mat<S> out_mu;   // L*F x K*B
  Mat<S> out_var;  // L*F x K*B (ones for the homoscedastic variant)
};

struct ForwardOptions {
  double variance_floor = 1e-6;
  nn::DropoutSettings dropout{};
};

/// `noise` (D x K*B) selects z = mu + sqrt(var) * noise; null uses z = mu.
template <typename S>
void vae_forward(const VaeParams<S>& params, const ModelShape& shape, const Mat<S>& input, Eigen::Index batch,
                 const Mat<S>* noise, const ForwardOptions& opts, VaeBatchCache<S>& cache) {
  const Eigen::Index D = shape.latent;
  const Eigen::Index W = shape.token_width();
  if (input.rows() != W || batch <= 0 || input.cols() != static_cast<Eigen::Index>(shape.tokens) * batch) {
    throw ShapeError("vae: input must be (L*F) x (K*B)");
  }
  const S floor = static_cast<S>(opts.variance_floor);
  cache.batch = batch;
  cache.input = input;
  cache.embedded = nn::linear_forward(params.embed, input);
  cache.encoded = nn::lstm_stack_forward(params.encoder, cache.embedded, batch, opts.dropout, cache.encoder);
  cache.theta = nn::linear_forward(params.latent_head, cache.encoded);
  cache.latent_mu = cache.theta.topRows(D);
  cache.latent_var = positive_variance(cache.theta.bottomRows(D).array(), floor).matrix();
  cache.sampled = noise != nullptr;
  if (noise) {
    if (noise->rows() != D || noise->cols() != input.cols()) throw ShapeError("vae: noise must be D x (K*B)");
    cache.noise = *noise;
    cache.z = (cache.latent_mu.array() + cache.latent_var.array().sqrt() * noise->array()).matrix();
  } else {
    cache.noise.resize(0, 0);
    cache.z = cache.latent_mu;
  }
  cache.latent_embedded = nn::linear_forward(params.latent_embed, cache.z);
  cache.decoded = nn::lstm_stack_forward(params.decoder, cache.latent_embedded, batch, opts.dropout, cache.decoder);
  cache.mlp_act = nn::linear_forward(params.mlp_hidden, cache.decoded).array().tanh().matrix();
  cache.out_raw = nn::linear_forward(params.mlp_out, cache.mlp_act);
  cache.out_mu = cache.out_raw.topRows(W);
  if (shape.output == OutputKind::Heteroscedastic) {
    cache.out_var = positive_variance(cache.out_raw.bottomRows(W).array(), floor).matrix();
  } else {
    cache.out_var = Mat<S>::Ones(W, input.cols());
  }
}

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

struct LossSettings {
  double beta = 0.01;
  double beta_l = 0.5;
  OutputKind output = OutputKind::Heteroscedastic;

  static LossSettings from(const TrainConfig& cfg) { return {cfg.beta, cfg.beta_l, cfg.output}; }
};

/// total = recon + beta * KL. recon is the mean over entries of
/// var^beta_l * NLL (heteroscedastic) or of the squared error
/// (homoscedastic); KL is summed over tokens and latent dims and averaged
/// over the batch.
template <typename S>
LossTerms vae_batch_loss(const VaeBatchCache<S>& cache, const LossSettings& loss) {
  LossTerms terms;
  const double entries = static_cast<double>(cache.out_mu.size());
  const auto x = cache.input.array().template cast<double>();
  const auto mu = cache.out_mu.array().template cast<double>();
  if (loss.output == OutputKind::Heteroscedastic) {
    const auto var = cache.out_var.array().template cast<double>();
    const auto nll = 0.5 * (var.log() + (x - mu).square() / var) + kHalfLog2Pi;
    if (loss.beta_l == 0.0) {
      terms.recon = nll.sum() / entries;
    } else {
      terms.recon = (var.pow(loss.beta_l) * nll).sum() / entries;
    }
  } else {
    terms.recon = (x - mu).square().sum() / entries;
  }
  const auto lm = cache.latent_mu.array().template cast<double>();
  const auto lv = cache.latent_var.array().template cast<double>();
  terms.kl = 0.5 * (lm.square() + lv - lv.log() - 1.0).sum() / static_cast<double>(cache.batch);
  terms.total = terms.recon + loss.beta * terms.kl;
  return terms;
}

/// Gradient of vae_batch_loss with respect to every parameter; adds into
/// `grad`. The var^beta_l weight is held constant.
template <typename S>
void vae_backward(const VaeParams<S>& params, const ModelShape& shape, const VaeBatchCache<S>& cache,
                  const LossSettings& loss, VaeParams<S>& grad) {
  const Eigen::Index D = shape.latent;
  const Eigen::Index W = shape.token_width();
  const S inv_n = static_cast<S>(1.0 / static_cast<double>(cache.out_mu.size()));
  const S one(1);

  Mat<S> d_out(shape.output_rows(), cache.out_raw.cols());
  const auto x = cache.input.array();
  const auto mu = cache.out_mu.array();
  if (shape.output == OutputKind::Heteroscedastic) {
    const auto var = cache.out_var.array();
    Mat<S> weight = Mat<S>::Constant(W, cache.out_mu.cols(), inv_n);
    if (loss.beta_l != 0.0) weight.array() *= var.pow(static_cast<S>(loss.beta_l));
    const auto diff = mu - x;
    d_out.topRows(W) = (weight.array() * diff / var).matrix();
    const auto d_var = weight.array() * S(0.5) * (var.inverse() - diff.square() / var.square());
    d_out.bottomRows(W) = (d_var * nn::sigmoid(cache.out_raw.bottomRows(W).array())).matrix();
  } else {
    d_out = (S(2) * inv_n * (mu - x)).matrix();
  }

  Mat<S> d_act = nn::linear_backward(params.mlp_out, cache.mlp_act, d_out, grad.mlp_out);
  d_act.array() *= one - cache.mlp_act.array().square();
  const Mat<S> d_decoded = nn::linear_backward(params.mlp_hidden, cache.decoded, d_act, grad.mlp_hidden);
  const Mat<S> d_latent_embedded = nn::lstm_stack_backward(params.decoder, cache.decoder, d_decoded, grad.decoder);
  const Mat<S> d_z = nn::linear_backward(params.latent_embed, cache.z, d_latent_embedded, grad.latent_embed);

  const S kl_scale = static_cast<S>(loss.beta / static_cast<double>(cache.batch));
  const auto lv = cache.latent_var.array();
  Mat<S> d_mu = (d_z.array() + kl_scale * cache.latent_mu.array()).matrix();
  Mat<S> d_var = (kl_scale * S(0.5) * (one - lv.inverse())).matrix();
  if (cache.sampled) d_var.array() += d_z.array() * cache.noise.array() * S(0.5) / lv.sqrt();
  Mat<S> d_theta(2 * D, cache.theta.cols());
  d_theta.topRows(D) = d_mu;
  d_theta.bottomRows(D) = (d_var.array() * nn::sigmoid(cache.theta.bottomRows(D).array())).matrix();

  const Mat<S> d_encoded = nn::linear_backward(params.latent_head, cache.encoded, d_theta, grad.latent_head);
  const Mat<S> d_embedded = nn::lstm_stack_backward(params.encoder, cache.encoder, d_encoded, grad.encoder);
  nn::linear_backward(params.embed, cache.input, d_embedded, grad.embed);
}

/// Per-token Gaussian latent of one day: K x D.
struct LatentField {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd var;
  Eigen::MatrixXd z;
};

/// Per-minute Gaussian reconstruction of one day: T x F.
struct GaussianField {
  DayMatrix mu;
  DayMatrix var;
};

/// Encoder pass on one tokenized day (no dropout); z is left empty.
LatentField encode(const TokenMatrix& tokens, const VaeParams<double>& params, const ModelShape& shape,
                   double variance_floor = 1e-6);

/// z = mu + sqrt(var) * noise.
Eigen::MatrixXd reparam_sample(const LatentField& latent, const Eigen::MatrixXd& noise);

/// Decoder pass from a K x D latent to a T x F Gaussian field.
GaussianField decode(const Eigen::MatrixXd& z, const VaeParams<double>& params, const ModelShape& shape,
                     double variance_floor = 1e-6);

/// 0.5 * sum(mu^2 + var - log var - 1).
double kl_divergence(const LatentField& latent);

/// Per-entry 0.5 * (log var + (x - mu)^2 / var) + 0.5 * log(2 pi).
DayMatrix gaussian_nll(const DayMatrix& x, const GaussianField& recon);

/// Mean over entries of var^beta_l * NLL.
double bnll_loss(const DayMatrix& x, const GaussianField& recon, double beta_l);

/// Loss of one day for the given noise (K x D) with dropout disabled.
LossTerms vae_loss(const DayMatrix& x, const VaeParams<double>& params, const ModelShape& shape,
                   const TrainConfig& cfg, const Eigen::MatrixXd& noise);

/// Everything needed to score raw days: parameters, hyperparameters,
/// normalizer, and (homoscedastic variant) the fitted error scaler.
struct ModelCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  TrainConfig config;
  ModelShape shape;
  NormStats norm;
  VaeParams<float> params;
  std::optional<ErrorScaler> error_scaler;

  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;
  static ModelCheckpoint load(const std::filesystem::path& path);
  static ModelCheckpoint read(std::istream& in);
};

struct TrainLogRow {
  long step = 0;
  double train_total = 0.0;
  double train_recon = 0.0;
  double train_kl = 0.0;
  double val_total = 0.0;
  double val_nll = 0.0;  // mean per-entry NLL, posterior-mean latent
};

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& rows);

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<TrainLogRow> log;
};

/// Non-finite loss or gradient during training. Carries the parameters
/// from before the failing step.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step, std::shared_ptr<const ModelCheckpoint> last_good)
      : Error(what), step_(step), last_good_(std::move(last_good)) {}
  long step() const { return step_; }
  const std::shared_ptr<const ModelCheckpoint>& last_good() const { return last_good_; }

 private:
  long step_;
  std::shared_ptr<const ModelCheckpoint> last_good_;
};

using TrainLogCallback = std::function<void(const TrainLogRow&)>;

/// Runs cfg.update_steps Adam steps on mini-batches of whole days sampled
/// uniformly with replacement. `norm` must be fitted on the training days.
TrainResult train(const std::vector<DayTrace>& training_days, const std::vector<DayTrace>& validation_days,
                  const NormStats& norm, const TrainConfig& cfg, const TrainLogCallback& on_log = {});

enum class LatentMode { PosteriorMean, Sampled };

struct ReconstructOptions {
  LatentMode mode = LatentMode::PosteriorMean;
  int samples = 1;
  std::uint64_t seed = 0;
};

/// Reconstruction of an already normalized day. Sampled mode averages the
/// decoded means and variances over `samples` latent draws.
GaussianField reconstruct_normalized(const DayMatrix& normalized, const ModelCheckpoint& ckpt,
                                     const ReconstructOptions& opts = {});

/// Normalizes a raw day with the embedded statistics, then reconstructs.
GaussianField reconstruct(const DayTrace& day, const ModelCheckpoint& ckpt, const ReconstructOptions& opts = {});

}  // namespace stsad
