#include "stsad/nn.hpp"

#include <algorithm>

namespace stsad::nn {

GradCheckResult grad_check(const LossWithGradient& loss, const std::vector<Mat<double>*>& params, std::size_t probes,
                           Rng& rng, double step, double abs_floor) {
  std::vector<Mat<double>> analytic;
  analytic.reserve(params.size());
  for (const auto* p : params) analytic.push_back(Mat<double>::Zero(p->rows(), p->cols()));
  loss(&analytic);

  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto* p : params) {
    sizes.push_back(static_cast<std::size_t>(p->size()));
    total += sizes.back();
  }
  GradCheckResult result;
  if (total == 0) return result;
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t probe = 0; probe < probes; ++probe) {
    std::size_t flat = pick(rng);
    std::size_t tensor = 0;
    while (flat >= sizes[tensor]) flat -= sizes[tensor++];
    double& value = params[tensor]->data()[flat];
    const double saved = value;
    value = saved + step;
    const double up = loss(nullptr);
    value = saved - step;
    const double down = loss(nullptr);
    value = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[tensor].data()[flat];
    const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
    ++result.probes;
  }
  return result;
}

}  // namespace stsad::nn
