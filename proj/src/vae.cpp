#include "stsad/vae.hpp"

#include "stsad/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

namespace stsad {

std::string_view to_string(OutputKind kind) {
  return kind == OutputKind::Heteroscedastic ? "heteroscedastic" : "homoscedastic";
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("invalid training config: " + what);
  };
  require(beta >= 0.0, "beta must be >= 0");
  require(beta_l >= 0.0 && beta_l <= 1.0, "beta_l must lie in [0, 1]");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(num_layers > 0 && hidden_dim > 0 && latent_dim > 0 && token_length > 0, "dimensions must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(update_steps >= 0, "update_steps must be >= 0");
  require(batch_size > 0, "batch_size must be positive");
  require(log_every > 0, "log_every must be positive");
  require(variance_floor > 0.0, "variance_floor must be positive");
}

std::string TrainConfig::to_text() const {
  nlohmann::json j;
  j["version"] = 1;
  j["beta"] = beta;
  j["beta_l"] = beta_l;
  j["learning_rate"] = learning_rate;
  j["num_layers"] = num_layers;
  j["hidden_dim"] = hidden_dim;
  j["latent_dim"] = latent_dim;
  j["dropout"] = dropout;
  j["token_length"] = token_length;
  j["update_steps"] = update_steps;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["log_every"] = log_every;
  j["variance_floor"] = variance_floor;
  j["output"] = std::string(to_string(output));
  return j.dump();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw CheckpointError("unsupported training config version");
    c.beta = j.at("beta").get<double>();
    c.beta_l = j.at("beta_l").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.token_length = j.at("token_length").get<int>();
    c.update_steps = j.at("update_steps").get<long>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.log_every = j.at("log_every").get<int>();
    c.variance_floor = j.at("variance_floor").get<double>();
    const auto output = j.at("output").get<std::string>();
    if (output == "heteroscedastic") c.output = OutputKind::Heteroscedastic;
    else if (output == "homoscedastic") c.output = OutputKind::Homoscedastic;
    else throw CheckpointError("unknown output kind '" + output + "'");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::paper_profile() { return TrainConfig{}; }

TrainConfig TrainConfig::desk_profile() {
  TrainConfig c;
  c.update_steps = 2000;
  c.learning_rate = 1e-3;
  return c;
}

ModelShape ModelShape::from(const TrainConfig& cfg, int features, int timesteps) {
  if (features <= 0) throw ShapeError("model needs at least one feature");
  if (timesteps % cfg.token_length != 0) {
    throw ShapeError("token length " + std::to_string(cfg.token_length) + " does not divide " +
                     std::to_string(timesteps));
  }
  ModelShape s;
  s.features = features;
  s.token_length = cfg.token_length;
  s.tokens = timesteps / cfg.token_length;
  s.hidden = cfg.hidden_dim;
  s.layers = cfg.num_layers;
  s.latent = cfg.latent_dim;
  s.output = cfg.output;
  return s;
}

namespace {

Mat<double> tokens_to_input(const TokenMatrix& tokens) { return tokens.transpose(); }

GaussianField field_from_columns(const Mat<double>& mu_cols, const Mat<double>& var_cols, const ModelShape& shape) {
  // Column k of an (L*F x K) matrix is token k; its column-major storage is
  // the row-major T x F day.
  GaussianField field;
  const Eigen::Index T = static_cast<Eigen::Index>(shape.tokens) * shape.token_length;
  field.mu = Eigen::Map<const DayMatrix>(mu_cols.data(), T, shape.features);
  field.var = Eigen::Map<const DayMatrix>(var_cols.data(), T, shape.features);
  return field;
}

Mat<double> day_to_input(const DayMatrix& day, const ModelShape& shape) {
  if (day.cols() != shape.features || day.rows() != static_cast<Eigen::Index>(shape.tokens) * shape.token_length) {
    throw ShapeError("day shape does not match the model");
  }
  return Eigen::Map<const Mat<double>>(day.data(), shape.token_width(), shape.tokens);
}

void check_token_shape(const TokenMatrix& tokens, const ModelShape& shape) {
  if (tokens.rows() != shape.tokens || tokens.cols() != shape.token_width()) {
    throw ShapeError("tokens must be " + std::to_string(shape.tokens) + " x " + std::to_string(shape.token_width()));
  }
}

}  // namespace

LatentField encode(const TokenMatrix& tokens, const VaeParams<double>& params, const ModelShape& shape,
                   double variance_floor) {
  check_token_shape(tokens, shape);
  const Mat<double> embedded = nn::linear_forward(params.embed, tokens_to_input(tokens));
  nn::LstmStackCache<double> cache;
  const Mat<double> encoded = nn::lstm_stack_forward(params.encoder, embedded, 1, {}, cache);
  const Mat<double> theta = nn::linear_forward(params.latent_head, encoded);
  LatentField latent;
  latent.mu = theta.topRows(shape.latent).transpose();
  latent.var = positive_variance(theta.bottomRows(shape.latent).array(), variance_floor).matrix().transpose();
  return latent;
}

Eigen::MatrixXd reparam_sample(const LatentField& latent, const Eigen::MatrixXd& noise) {
  if (noise.rows() != latent.mu.rows() || noise.cols() != latent.mu.cols()) {
    throw ShapeError("reparam_sample: noise shape differs from the latent");
  }
  return (latent.mu.array() + latent.var.array().sqrt() * noise.array()).matrix();
}

GaussianField decode(const Eigen::MatrixXd& z, const VaeParams<double>& params, const ModelShape& shape,
                     double variance_floor) {
  if (z.rows() != shape.tokens || z.cols() != shape.latent) {
    throw ShapeError("decode: latent must be " + std::to_string(shape.tokens) + " x " + std::to_string(shape.latent));
  }
  const Mat<double> latent_embedded = nn::linear_forward(params.latent_embed, Mat<double>(z.transpose()));
  nn::LstmStackCache<double> cache;
  const Mat<double> decoded = nn::lstm_stack_forward(params.decoder, latent_embedded, 1, {}, cache);
  const Mat<double> act = nn::linear_forward(params.mlp_hidden, decoded).array().tanh().matrix();
  const Mat<double> out = nn::linear_forward(params.mlp_out, act);
  const Eigen::Index W = shape.token_width();
  const Mat<double> mu = out.topRows(W);
  const Mat<double> var = shape.output == OutputKind::Heteroscedastic
                              ? Mat<double>(positive_variance(out.bottomRows(W).array(), variance_floor).matrix())
                              : Mat<double>(Mat<double>::Ones(W, out.cols()));
  return field_from_columns(mu, var, shape);
}

double kl_divergence(const LatentField& latent) {
  const auto mu = latent.mu.array();
  const auto var = latent.var.array();
  return 0.5 * (mu.square() + var - var.log() - 1.0).sum();
}

DayMatrix gaussian_nll(const DayMatrix& x, const GaussianField& recon) {
  if (x.rows() != recon.mu.rows() || x.cols() != recon.mu.cols() || recon.var.rows() != x.rows() ||
      recon.var.cols() != x.cols()) {
    throw ShapeError("gaussian_nll: data and reconstruction differ in shape");
  }
  const auto var = recon.var.array();
  return (0.5 * (var.log() + (x - recon.mu).array().square() / var) + kHalfLog2Pi).matrix();
}

double bnll_loss(const DayMatrix& x, const GaussianField& recon, double beta_l) {
  if (!(beta_l >= 0.0 && beta_l <= 1.0)) throw ParameterError("beta_l must lie in [0, 1]");
  const DayMatrix nll = gaussian_nll(x, recon);
  if (beta_l == 0.0) return nll.mean();
  return (recon.var.array().pow(beta_l) * nll.array()).mean();
}

LossTerms vae_loss(const DayMatrix& x, const VaeParams<double>& params, const ModelShape& shape,
                   const TrainConfig& cfg, const Eigen::MatrixXd& noise) {
  if (noise.rows() != shape.tokens || noise.cols() != shape.latent) throw ShapeError("vae_loss: noise must be K x D");
  VaeBatchCache<double> cache;
  const Mat<double> noise_cols = noise.transpose();
  vae_forward(params, shape, day_to_input(x, shape), 1, &noise_cols, {cfg.variance_floor, {}}, cache);
  const LossTerms terms = vae_batch_loss(cache, LossSettings::from(cfg));
  if (!std::isfinite(terms.total)) throw ParameterError("vae_loss: non-finite loss");
  return terms;
}

// --- checkpoint -----------------------------------------------------------

namespace {

TensorBlock to_block(const std::string& name, const Mat<float>& m) {
  TensorBlock b;
  b.name = name;
  b.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  b.data.assign(m.data(), m.data() + m.size());
  return b;
}

void from_block(const TensorBlock& b, Mat<float>& m) {
  if (b.shape.size() != 2 || b.shape[0] != static_cast<std::uint64_t>(m.rows()) ||
      b.shape[1] != static_cast<std::uint64_t>(m.cols())) {
    throw CheckpointError("parameter block '" + b.name + "' has an unexpected shape");
  }
  m = Eigen::Map<const Mat<float>>(b.data.data(), m.rows(), m.cols());
}

std::string scaler_tag(const std::optional<ErrorScaler>& scaler) {
  if (!scaler) return "none";
  return scaler->kind == ScalerKind::ZNorm ? "znorm" : "iqr";
}

}  // namespace

void ModelCheckpoint::write(std::ostream& out) const {
  Container c;
  c.magic = kVaeMagic;
  c.version = kFormatVersion;
  c.texts = {config.to_text(), norm.to_text(), scaler_tag(error_scaler)};
  visit_tensors(params, [&c](const std::string& name, const Mat<float>& m) { c.blocks.push_back(to_block(name, m)); });
  if (error_scaler) {
    c.blocks.push_back(to_block("error_scaler.location", Mat<double>(error_scaler->location).cast<float>()));
    c.blocks.push_back(to_block("error_scaler.scale", Mat<double>(error_scaler->scale).cast<float>()));
  }
  write_container(out, c);
}

void ModelCheckpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  write(out);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

ModelCheckpoint ModelCheckpoint::read(std::istream& in) {
  const Container c = read_container(in);
  if (c.magic != kVaeMagic) throw CheckpointError("not a VAE checkpoint");
  if (c.version != kFormatVersion) {
    throw CheckpointError("unsupported VAE checkpoint version " + std::to_string(c.version));
  }
  if (c.texts.size() != 3) throw CheckpointError("VAE checkpoint header is incomplete");
  ModelCheckpoint ckpt;
  ckpt.config = TrainConfig::from_text(c.texts[0]);
  ckpt.norm = NormStats::from_text(c.texts[1]);
  ckpt.shape = ModelShape::from(ckpt.config, static_cast<int>(ckpt.norm.num_channels()));
  ckpt.params = VaeParams<float>::zeros(ckpt.shape);
  visit_tensors(ckpt.params, [&c](const std::string& name, Mat<float>& m) { from_block(c.block(name), m); });
  if (c.texts[2] != "none") {
    ErrorScaler scaler;
    scaler.kind = c.texts[2] == "znorm" ? ScalerKind::ZNorm : ScalerKind::InterQuartile;
    const Eigen::Index T = static_cast<Eigen::Index>(ckpt.shape.tokens) * ckpt.shape.token_length;
    Mat<float> loc(T, ckpt.shape.features), scale(T, ckpt.shape.features);
    from_block(c.block("error_scaler.location"), loc);
    from_block(c.block("error_scaler.scale"), scale);
    scaler.location = loc.cast<double>();
    scaler.scale = scale.cast<double>();
    ckpt.error_scaler = std::move(scaler);
  }
  return ckpt;
}

ModelCheckpoint ModelCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read(in);
}

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& rows) {
  out << "step,train_total,train_recon,train_kl,val_total\n";
  out.precision(9);
  for (const auto& r : rows) {
    out << r.step << ',' << r.train_total << ',' << r.train_recon << ',' << r.train_kl << ',' << r.val_total << '\n';
  }
}

// --- reconstruction -------------------------------------------------------

namespace {

GaussianField reconstruct_with(const DayMatrix& normalized, const VaeParams<double>& params, const ModelShape& shape,
                               double floor, const ReconstructOptions& opts) {
  const Mat<double> input = day_to_input(normalized, shape);
  VaeBatchCache<double> cache;
  if (opts.mode == LatentMode::PosteriorMean) {
    vae_forward(params, shape, input, 1, static_cast<const Mat<double>*>(nullptr), {floor, {}}, cache);
    return field_from_columns(cache.out_mu, cache.out_var, shape);
  }
  if (opts.samples < 1) throw ParameterError("sampled reconstruction needs at least one sample");
  nn::Rng rng(opts.seed);
  std::normal_distribution<double> normal;
  Mat<double> noise(shape.latent, shape.tokens);
  Mat<double> mu_sum = Mat<double>::Zero(shape.token_width(), shape.tokens);
  Mat<double> var_sum = mu_sum;
  for (int s = 0; s < opts.samples; ++s) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
    vae_forward(params, shape, input, 1, &noise, {floor, {}}, cache);
    mu_sum += cache.out_mu;
    var_sum += cache.out_var;
  }
  return field_from_columns(mu_sum / opts.samples, var_sum / opts.samples, shape);
}

}  // namespace

GaussianField reconstruct_normalized(const DayMatrix& normalized, const ModelCheckpoint& ckpt,
                                     const ReconstructOptions& opts) {
  return reconstruct_with(normalized, ckpt.params.cast<double>(), ckpt.shape, ckpt.config.variance_floor, opts);
}

GaussianField reconstruct(const DayTrace& day, const ModelCheckpoint& ckpt, const ReconstructOptions& opts) {
  return reconstruct_normalized(apply_normalizer(day.values, ckpt.norm), ckpt, opts);
}

// --- training -------------------------------------------------------------

namespace {

std::vector<Mat<float>> tokenize_days(const std::vector<DayTrace>& days, const NormStats& norm,
                                      const ModelShape& shape) {
  std::vector<Mat<float>> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(day_to_input(apply_normalizer(d.values, norm), shape).cast<float>());
  return out;
}

std::vector<Mat<float>*> tensor_list(VaeParams<float>& p) {
  std::vector<Mat<float>*> out;
  visit_tensors(p, [&out](const std::string&, Mat<float>& m) { out.push_back(&m); });
  return out;
}

struct ValidationLoss {
  double total = std::numeric_limits<double>::quiet_NaN();
  double nll = std::numeric_limits<double>::quiet_NaN();
};

ValidationLoss validation_loss(const VaeParams<float>& params, const ModelShape& shape, const TrainConfig& cfg,
                               const std::vector<Mat<float>>& days) {
  ValidationLoss out;
  if (days.empty()) return out;
  nn::Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<float> normal;
  const Eigen::Index K = shape.tokens;
  const Eigen::Index W = shape.token_width();
  const LossSettings loss = LossSettings::from(cfg);
  double total = 0.0;
  double nll = 0.0;
  VaeBatchCache<float> cache;
  for (std::size_t start = 0; start < days.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
    const auto B = static_cast<Eigen::Index>(std::min<std::size_t>(cfg.batch_size, days.size() - start));
    Mat<float> input(W, K * B);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index k = 0; k < K; ++k) input.col(k * B + b) = days[start + static_cast<std::size_t>(b)].col(k);
    Mat<float> noise(shape.latent, K * B);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
    vae_forward(params, shape, input, B, &noise, {cfg.variance_floor, {}}, cache);
    total += vae_batch_loss(cache, loss).total * static_cast<double>(B);
    vae_forward(params, shape, input, B, static_cast<const Mat<float>*>(nullptr), {cfg.variance_floor, {}}, cache);
    const auto x = cache.input.array().cast<double>();
    const auto mu = cache.out_mu.array().cast<double>();
    const auto var = cache.out_var.array().cast<double>();
    nll += (0.5 * (var.log() + (x - mu).square() / var) + kHalfLog2Pi).mean() * static_cast<double>(B);
  }
  out.total = total / static_cast<double>(days.size());
  out.nll = nll / static_cast<double>(days.size());
  return out;
}

}  // namespace

TrainResult train(const std::vector<DayTrace>& training_days, const std::vector<DayTrace>& validation_days,
                  const NormStats& norm, const TrainConfig& cfg, const TrainLogCallback& on_log) {
  cfg.validate();
  if (training_days.empty()) throw ParameterError("training set is empty");
  const ModelShape shape = ModelShape::from(cfg, static_cast<int>(norm.num_channels()));
  const std::vector<Mat<float>> train_tokens = tokenize_days(training_days, norm, shape);
  const std::vector<Mat<float>> val_tokens = tokenize_days(validation_days, norm, shape);

  nn::Rng rng(cfg.seed);
  VaeParams<float> params = VaeParams<float>::init(shape, rng);
  VaeParams<float> grad = VaeParams<float>::zeros(shape);
  const auto param_ptrs = tensor_list(params);
  const auto grad_ptrs_mut = tensor_list(grad);
  const std::vector<const Mat<float>*> grad_ptrs(grad_ptrs_mut.begin(), grad_ptrs_mut.end());
  nn::Adam<float> adam({cfg.learning_rate});

  const Eigen::Index K = shape.tokens;
  const Eigen::Index B = cfg.batch_size;
  std::uniform_int_distribution<std::size_t> pick(0, train_tokens.size() - 1);
  std::normal_distribution<float> normal;
  const LossSettings loss = LossSettings::from(cfg);
  const ForwardOptions fwd{cfg.variance_floor, {cfg.dropout, true, &rng}};

  auto snapshot = [&]() {
    auto ckpt = std::make_shared<ModelCheckpoint>();
    ckpt->config = cfg;
    ckpt->shape = shape;
    ckpt->norm = norm;
    ckpt->params = params;
    return ckpt;
  };

  TrainResult result;
  auto log_row = [&](long step, const LossTerms& terms) {
    const ValidationLoss val = validation_loss(params, shape, cfg, val_tokens);
    TrainLogRow row{step, terms.total, terms.recon, terms.kl, val.total, val.nll};
    result.log.push_back(row);
    if (on_log) on_log(row);
  };

  Mat<float> input(shape.token_width(), K * B);
  Mat<float> noise(shape.latent, K * B);
  VaeBatchCache<float> cache;
  for (long step = 1; step <= cfg.update_steps; ++step) {
    for (Eigen::Index b = 0; b < B; ++b) {
      const Mat<float>& day = train_tokens[pick(rng)];
      for (Eigen::Index k = 0; k < K; ++k) input.col(k * B + b) = day.col(k);
    }
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);

    vae_forward(params, shape, input, B, &noise, fwd, cache);
    const LossTerms terms = vae_batch_loss(cache, loss);
    if (!std::isfinite(terms.total)) {
      throw TrainingError("non-finite training loss at step " + std::to_string(step) + " (recon " +
                              std::to_string(terms.recon) + ", kl " + std::to_string(terms.kl) + ")",
                          step, snapshot());
    }
    if (step == 1) log_row(0, terms);

    for (auto* g : grad_ptrs_mut) g->setZero();
    vae_backward(params, shape, cache, loss, grad);
    try {
      adam.step(param_ptrs, grad_ptrs);
    } catch (const OptimizerError& e) {
      throw TrainingError(e.what(), step, snapshot());
    }
    if (step % cfg.log_every == 0 || step == cfg.update_steps) log_row(step, terms);
  }

  result.checkpoint = *snapshot();
  if (cfg.output == OutputKind::Homoscedastic) {
    std::vector<DayMatrix> errors;
    errors.reserve(training_days.size());
    const VaeParams<double> dparams = params.cast<double>();
    for (const auto& d : training_days) {
      const DayMatrix x = apply_normalizer(d.values, norm);
      errors.push_back(error_vector(x, reconstruct_with(x, dparams, shape, cfg.variance_floor, {}).mu));
    }
    result.checkpoint.error_scaler = fit_error_scaler(errors, ScalerKind::ZNorm);
  }
  return result;
}

}  // namespace stsad
