#include "stsad/error_scaler.hpp"

#include "stsad/error.hpp"

#include <algorithm>
#include <cmath>

namespace stsad {

DayMatrix error_vector(const DayMatrix& x, const DayMatrix& recon) {
  if (x.rows() != recon.rows() || x.cols() != recon.cols()) {
    throw ShapeError("error_vector: data and reconstruction differ in shape");
  }
  return (x - recon).cwiseAbs();
}

double quantile(std::vector<double> sample, double q) {
  if (sample.empty()) throw ParameterError("quantile of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double pos = q * static_cast<double>(sample.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sample.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sample[lo] + frac * (sample[hi] - sample[lo]);
}

ErrorScaler fit_error_scaler(const std::vector<DayMatrix>& training_errors, ScalerKind kind) {
  if (training_errors.empty()) throw ParameterError("fit_error_scaler needs at least one training day");
  const Eigen::Index T = training_errors.front().rows();
  const Eigen::Index F = training_errors.front().cols();
  for (const auto& e : training_errors) {
    if (e.rows() != T || e.cols() != F) throw ShapeError("fit_error_scaler: error matrices differ in shape");
  }
  ErrorScaler scaler;
  scaler.kind = kind;
  scaler.location.resize(T, F);
  scaler.scale.resize(T, F);
  const double n = static_cast<double>(training_errors.size());
  std::vector<double> cell(training_errors.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index f = 0; f < F; ++f) {
      for (std::size_t d = 0; d < training_errors.size(); ++d) cell[d] = training_errors[d](t, f);
      double loc = 0.0;
      double scale = 0.0;
      if (kind == ScalerKind::ZNorm) {
        for (double v : cell) loc += v;
        loc /= n;
        for (double v : cell) scale += (v - loc) * (v - loc);
        scale = std::sqrt(scale / n);
      } else {
        loc = quantile(cell, 0.5);
        scale = quantile(cell, 0.75) - quantile(cell, 0.25);
      }
      scaler.location(t, f) = loc;
      scaler.scale(t, f) = std::max(scale, kScaleFloor);
    }
  }
  return scaler;
}

DayMatrix apply_scaler(const DayMatrix& errors, const ErrorScaler& scaler) {
  if (errors.rows() != scaler.location.rows() || errors.cols() != scaler.location.cols()) {
    throw ShapeError("apply_scaler: error matrix does not match the scaler shape");
  }
  return ((errors - scaler.location).array() / scaler.scale.array()).matrix();
}

}  // namespace stsad
