#pragma once

#include "stsad/types.hpp"

#include <vector>

namespace stsad {

enum class ScalerKind { ZNorm, InterQuartile };

inline constexpr double kScaleFloor = 1e-6;

/// Per-(minute, channel) location and scale of training reconstruction
/// errors. ZNorm: mean and population standard deviation. InterQuartile:
/// median and inter-quartile range (linearly interpolated quartiles).
struct ErrorScaler {
  ScalerKind kind = ScalerKind::ZNorm;
  DayMatrix location;  // T x F
  DayMatrix scale;     // T x F, floored at kScaleFloor
};

/// Elementwise |x - recon|.
DayMatrix error_vector(const DayMatrix& x, const DayMatrix& recon);

ErrorScaler fit_error_scaler(const std::vector<DayMatrix>& training_errors, ScalerKind kind);

/// Elementwise (E - location) / scale.
DayMatrix apply_scaler(const DayMatrix& errors, const ErrorScaler& scaler);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> sample, double q);

}  // namespace stsad
