#pragma once

// Building blocks for the recurrent VAE: linear maps, stacked LSTMs,
// dropout and Adam. Activations are column-major with one column per
// sample; a sequence of K steps over a batch of B is a (dim x K*B) matrix
// whose column k*B + b holds step k of sample b.

#include "stsad/error.hpp"
#include "stsad/types.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace stsad::nn {

using Rng = std::mt19937_64;

template <typename S>
struct Linear {
  Mat<S> weight;  // out x in
  Mat<S> bias;    // out x 1

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
template <typename S>
Linear<S> make_linear(Eigen::Index in, Eigen::Index out, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(static_cast<double>(in)),
                                              1.0 / std::sqrt(static_cast<double>(in)));
  Linear<S> layer{Mat<S>(out, in), Mat<S>::Zero(out, 1)};
  for (Eigen::Index j = 0; j < in; ++j)
    for (Eigen::Index i = 0; i < out; ++i) layer.weight(i, j) = static_cast<S>(dist(rng));
  return layer;
}

/// y = W x + b for every column x.
template <typename S>
Mat<S> linear_forward(const Linear<S>& layer, const Mat<S>& x) {
  if (x.rows() != layer.in_dim()) {
    throw ShapeError("linear: input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(layer.in_dim()));
  }
  Mat<S> y(layer.out_dim(), x.cols());
  y.noalias() = layer.weight * x;
  y.colwise() += layer.bias.col(0);
  return y;
}

/// Accumulates parameter gradients into `grad`; returns dL/dx.
template <typename S>
Mat<S> linear_backward(const Linear<S>& layer, const Mat<S>& x, const Mat<S>& dy, Linear<S>& grad) {
  grad.weight.noalias() += dy * x.transpose();
  grad.bias.noalias() += dy.rowwise().sum();
  Mat<S> dx(layer.in_dim(), dy.cols());
  dx.noalias() = layer.weight.transpose() * dy;
  return dx;
}

template <typename S>
inline auto sigmoid(const Eigen::ArrayBase<S>& x) {
  return (typename S::Scalar(1) + (-x).exp()).inverse();
}

/// Gate rows are ordered input, forget, cell candidate, output.
template <typename S>
struct LstmLayer {
  Mat<S> w_input;   // 4H x In
  Mat<S> w_hidden;  // 4H x H
  Mat<S> bias;      // 4H x 1

  Eigen::Index hidden_dim() const { return w_hidden.cols(); }
  Eigen::Index in_dim() const { return w_input.cols(); }
};

template <typename S>
LstmLayer<S> make_lstm_layer(Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  LstmLayer<S> layer{Mat<S>(4 * hidden, in), Mat<S>(4 * hidden, hidden), Mat<S>::Zero(4 * hidden, 1)};
  auto fill = [&rng](Mat<S>& m) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<S>(dist(rng));
  };
  fill(layer.w_input);
  fill(layer.w_hidden);
  layer.bias.middleRows(hidden, hidden).setOnes();  // forget gate
  return layer;
}

template <typename S>
struct LstmStepResult {
  Mat<S> h;
  Mat<S> c;
};

/// One gated update: c' = f*c + i*g, h' = o*tanh(c').
template <typename S>
LstmStepResult<S> lstm_step(const Mat<S>& x, const Mat<S>& h_prev, const Mat<S>& c_prev, const LstmLayer<S>& layer) {
  const Eigen::Index H = layer.hidden_dim();
  if (x.rows() != layer.in_dim() || h_prev.rows() != H || c_prev.rows() != H || h_prev.cols() != x.cols() ||
      c_prev.cols() != x.cols()) {
    throw ShapeError("lstm_step: state or input shape does not match the layer");
  }
  Mat<S> pre = layer.w_input * x + layer.w_hidden * h_prev;
  pre.colwise() += layer.bias.col(0);
  const auto i = sigmoid(pre.topRows(H).array()).eval();
  const auto f = sigmoid(pre.middleRows(H, H).array()).eval();
  const auto g = pre.middleRows(2 * H, H).array().tanh().eval();
  const auto o = sigmoid(pre.bottomRows(H).array()).eval();
  LstmStepResult<S> out;
  out.c = (f * c_prev.array() + i * g).matrix();
  out.h = (o * out.c.array().tanh()).matrix();
  return out;
}

template <typename S>
struct LstmCache {
  Mat<S> input;       // In x K*B
  Mat<S> gates;       // 4H x K*B, post-activation
  Mat<S> cells;       // H x (K+1)*B, block 0 is the zero initial cell
  Mat<S> hidden;      // H x (K+1)*B, block 0 is the zero initial state
  Mat<S> tanh_cells;  // H x K*B
  Eigen::Index batch = 0;
};

/// Runs the layer over a K-step sequence from a zero state.
template <typename S>
Mat<S> lstm_forward(const LstmLayer<S>& layer, const Mat<S>& input, Eigen::Index batch, LstmCache<S>& cache) {
  const Eigen::Index H = layer.hidden_dim();
  if (input.rows() != layer.in_dim() || batch <= 0 || input.cols() % batch != 0) {
    throw ShapeError("lstm_forward: input shape does not match the layer");
  }
  const Eigen::Index steps = input.cols() / batch;
  const Eigen::Index B = batch;
  cache.batch = B;
  cache.input = input;
  cache.gates.resize(4 * H, steps * B);
  cache.gates.noalias() = layer.w_input * input;
  cache.gates.colwise() += layer.bias.col(0);
  cache.cells.setZero(H, (steps + 1) * B);
  cache.hidden.setZero(H, (steps + 1) * B);
  cache.tanh_cells.resize(H, steps * B);

  for (Eigen::Index k = 0; k < steps; ++k) {
    auto pre = cache.gates.middleCols(k * B, B);
    pre.noalias() += layer.w_hidden * cache.hidden.middleCols(k * B, B);
    pre.topRows(H) = sigmoid(pre.topRows(H).array()).matrix();
    pre.middleRows(H, H) = sigmoid(pre.middleRows(H, H).array()).matrix();
    pre.middleRows(2 * H, H) = pre.middleRows(2 * H, H).array().tanh().matrix();
    pre.bottomRows(H) = sigmoid(pre.bottomRows(H).array()).matrix();
    cache.cells.middleCols((k + 1) * B, B) =
        (pre.middleRows(H, H).array() * cache.cells.middleCols(k * B, B).array() +
         pre.topRows(H).array() * pre.middleRows(2 * H, H).array())
            .matrix();
    cache.tanh_cells.middleCols(k * B, B) = cache.cells.middleCols((k + 1) * B, B).array().tanh().matrix();
    cache.hidden.middleCols((k + 1) * B, B) =
        (pre.bottomRows(H).array() * cache.tanh_cells.middleCols(k * B, B).array()).matrix();
  }
  return cache.hidden.rightCols(steps * B);
}

/// Backpropagation through time; accumulates into `grad`, returns dL/dinput.
template <typename S>
Mat<S> lstm_backward(const LstmLayer<S>& layer, const LstmCache<S>& cache, const Mat<S>& d_output,
                     LstmLayer<S>& grad) {
  const Eigen::Index H = layer.hidden_dim();
  const Eigen::Index B = cache.batch;
  const Eigen::Index steps = cache.input.cols() / B;
  Mat<S> d_pre(4 * H, steps * B);
  Mat<S> dh_next = Mat<S>::Zero(H, B);
  Mat<S> dc_next = Mat<S>::Zero(H, B);
  const S one(1);

  for (Eigen::Index k = steps - 1; k >= 0; --k) {
    const auto gates = cache.gates.middleCols(k * B, B).array();
    const auto i = gates.topRows(H);
    const auto f = gates.middleRows(H, H);
    const auto g = gates.middleRows(2 * H, H);
    const auto o = gates.bottomRows(H);
    const auto tc = cache.tanh_cells.middleCols(k * B, B).array();
    const auto c_prev = cache.cells.middleCols(k * B, B).array();

    const Mat<S> dh = d_output.middleCols(k * B, B) + dh_next;
    const Mat<S> dc = (dh.array() * o * (one - tc.square()) + dc_next.array()).matrix();
    auto dp = d_pre.middleCols(k * B, B);
    dp.topRows(H) = (dc.array() * g * i * (one - i)).matrix();
    dp.middleRows(H, H) = (dc.array() * c_prev * f * (one - f)).matrix();
    dp.middleRows(2 * H, H) = (dc.array() * i * (one - g.square())).matrix();
    dp.bottomRows(H) = (dh.array() * tc * o * (one - o)).matrix();
    dc_next = (dc.array() * f).matrix();
    dh_next.noalias() = layer.w_hidden.transpose() * dp;
    grad.w_hidden.noalias() += dp * cache.hidden.middleCols(k * B, B).transpose();
  }
  grad.w_input.noalias() += d_pre * cache.input.transpose();
  grad.bias.noalias() += d_pre.rowwise().sum();
  Mat<S> d_input(layer.in_dim(), steps * B);
  d_input.noalias() = layer.w_input.transpose() * d_pre;
  return d_input;
}

/// Mask entries are 0 with probability `rate`, else 1/(1-rate).
template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
  Mat<S> mask(rows, cols);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  std::bernoulli_distribution drop(rate);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = drop(rng) ? S(0) : keep_scale;
  return mask;
}

/// Inverted dropout; identity when not training or when rate == 0.
template <typename S>
Mat<S> dropout(const Mat<S>& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  return (x.array() * dropout_mask<S>(x.rows(), x.cols(), rate, rng).array()).matrix();
}

/// Stacked LSTM with dropout applied to the outputs of every layer except
/// the last.
template <typename S>
struct LstmStack {
  std::vector<LstmLayer<S>> layers;
};

template <typename S>
LstmStack<S> make_lstm_stack(Eigen::Index in, Eigen::Index hidden, int num_layers, Rng& rng) {
  LstmStack<S> stack;
  for (int l = 0; l < num_layers; ++l) stack.layers.push_back(make_lstm_layer<S>(l == 0 ? in : hidden, hidden, rng));
  return stack;
}

template <typename S>
struct LstmStackCache {
  std::vector<LstmCache<S>> layers;
  std::vector<Mat<S>> masks;  // empty matrix where no dropout was applied
};

struct DropoutSettings {
  double rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;
};

template <typename S>
Mat<S> lstm_stack_forward(const LstmStack<S>& stack, const Mat<S>& input, Eigen::Index batch,
                          const DropoutSettings& dropout_cfg, LstmStackCache<S>& cache) {
  const std::size_t n = stack.layers.size();
  cache.layers.resize(n);
  cache.masks.assign(n, Mat<S>());
  Mat<S> x = input;
  for (std::size_t l = 0; l < n; ++l) {
    x = lstm_forward(stack.layers[l], x, batch, cache.layers[l]);
    if (l + 1 < n && dropout_cfg.training && dropout_cfg.rate > 0.0) {
      cache.masks[l] = dropout_mask<S>(x.rows(), x.cols(), dropout_cfg.rate, *dropout_cfg.rng);
      x.array() *= cache.masks[l].array();
    }
  }
  return x;
}

template <typename S>
Mat<S> lstm_stack_backward(const LstmStack<S>& stack, const LstmStackCache<S>& cache, const Mat<S>& d_output,
                           LstmStack<S>& grad) {
  Mat<S> d = d_output;
  for (std::size_t l = stack.layers.size(); l-- > 0;) {
    if (cache.masks[l].size() != 0) d.array() *= cache.masks[l].array();
    d = lstm_backward(stack.layers[l], cache.layers[l], d, grad.layers[l]);
  }
  return d;
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Moment buffers are created on the
/// first step to mirror the parameter shapes.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Mat<S>*>& params, const std::vector<const Mat<S>*>& grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient lists differ in length");
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (params[p]->rows() != grads[p]->rows() || params[p]->cols() != grads[p]->cols()) {
        throw ShapeError("adam: gradient shape does not mirror parameter " + std::to_string(p));
      }
      if (!grads[p]->allFinite()) {
        throw OptimizerError("non-finite gradient in parameter tensor " + std::to_string(p) + " at step " +
                             std::to_string(step_ + 1));
      }
    }
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
        second_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
      }
    }
    if (first_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
    ++step_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    const S b1 = static_cast<S>(config_.beta1), b2 = static_cast<S>(config_.beta2);
    const S lr = static_cast<S>(config_.learning_rate), eps = static_cast<S>(config_.epsilon);
    const S inv_c1 = static_cast<S>(1.0 / c1), inv_c2 = static_cast<S>(1.0 / c2);
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto g = grads[p]->array();
      first_[p].array() = b1 * first_[p].array() + (S(1) - b1) * g;
      second_[p].array() = b2 * second_[p].array() + (S(1) - b2) * g.square();
      params[p]->array() -=
          lr * (first_[p].array() * inv_c1) / ((second_[p].array() * inv_c2).sqrt() + eps);
    }
  }

  long steps() const { return step_; }
  const std::vector<Mat<S>>& first_moments() const { return first_; }
  const std::vector<Mat<S>>& second_moments() const { return second_; }

 private:
  AdamConfig config_;
  std::vector<Mat<S>> first_;
  std::vector<Mat<S>> second_;
  long step_ = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
};

/// `loss` evaluates the objective at the current parameter values and, when
/// handed a non-null pointer, writes analytic gradients shaped like `params`.
using LossWithGradient = std::function<double(std::vector<Mat<double>>* gradients)>;

/// Compares analytic gradients with central differences on `probes`
/// randomly chosen coordinates. Relative error is
/// |a - n| / max(|a|, |n|, abs_floor).
GradCheckResult grad_check(const LossWithGradient& loss, const std::vector<Mat<double>*>& params, std::size_t probes,
                           Rng& rng, double step = 1e-5, double abs_floor = 1e-6);

}  // namespace stsad::nn
