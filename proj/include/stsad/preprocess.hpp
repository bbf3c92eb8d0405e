#pragma once

#include "stsad/dataset_io.hpp"
#include "stsad/types.hpp"

#include <string>
#include <vector>

namespace stsad {

/// Per-channel affine transform. For ZNorm, `offset` is the mean and
/// `scale` the standard deviation; for MinMax they are the (widened) lower
/// bound and range.
struct ChannelNorm {
  ChannelKind kind = ChannelKind::ZNorm;
  double offset = 0.0;
  double scale = 1.0;
  bool smooth = false;
};

struct NormStats {
  static constexpr int kFormatVersion = 1;

  std::vector<std::string> channels;
  std::vector<ChannelNorm> norms;
  int smooth_window = 15;
  double smooth_sigma = 2.5;

  std::size_t num_channels() const { return channels.size(); }

  std::string to_text() const;
  static NormStats from_text(const std::string& text);
};

/// Fraction of the training range added on both sides of MinMax channels.
inline constexpr double kMinMaxWidening = 1e-3;

struct SmoothingConfig {
  int window = 15;
  double sigma = 2.5;  // window / 6
};

/// Fits the transform of every schema channel on the training days.
/// Throws DegenerateChannelError for constant channels.
NormStats fit_normalizer(const std::vector<DayTrace>& training_days, const Schema& schema,
                         const SmoothingConfig& smoothing = {});

/// Normalizes every channel, then smooths the channels flagged `smooth`.
DayMatrix apply_normalizer(const DayMatrix& values, const NormStats& stats);

/// Inverse of the affine part of apply_normalizer (smoothing is not undone).
DayMatrix invert_normalizer(const DayMatrix& normalized, const NormStats& stats);

/// Truncated Gaussian kernel of `window` taps (odd), renormalized over the
/// valid support at the edges.
std::vector<double> gaussian_kernel(int window, double sigma);
std::vector<double> gaussian_smooth(const std::vector<double>& series, int window, double sigma);
inline std::vector<double> gaussian_smooth(const std::vector<double>& series, int window) {
  return gaussian_smooth(series, window, window / 6.0);
}

struct TokenConfig {
  int token_length = 30;
  int embedding_dim = 64;
};

/// Token matrix: K x (L*F), row k holding minutes [kL, (k+1)L) with the F
/// channels of each minute adjacent.
using TokenMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

TokenMatrix tokenize(const DayMatrix& day, const TokenConfig& cfg);
DayMatrix detokenize(const TokenMatrix& tokens, const TokenConfig& cfg, int num_features);

}  // namespace stsad
