#include "stsad/preprocess.hpp"

#include "stsad/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace stsad {

std::string NormStats::to_text() const {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["smooth_window"] = smooth_window;
  j["smooth_sigma"] = smooth_sigma;
  j["channels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < channels.size(); ++i) {
    j["channels"].push_back({{"name", channels[i]},
                             {"kind", std::string(to_string(norms[i].kind))},
                             {"offset", norms[i].offset},
                             {"scale", norms[i].scale},
                             {"smooth", norms[i].smooth}});
  }
  return j.dump();
}

NormStats NormStats::from_text(const std::string& text) {
  NormStats stats;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != kFormatVersion) {
      throw CheckpointError("unsupported normalizer format version " + j.at("version").dump());
    }
    stats.smooth_window = j.at("smooth_window").get<int>();
    stats.smooth_sigma = j.at("smooth_sigma").get<double>();
    for (const auto& c : j.at("channels")) {
      stats.channels.push_back(c.at("name").get<std::string>());
      stats.norms.push_back({parse_channel_kind(c.at("kind").get<std::string>()), c.at("offset").get<double>(),
                             c.at("scale").get<double>(), c.at("smooth").get<bool>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed normalizer record: ") + e.what());
  }
  return stats;
}

NormStats fit_normalizer(const std::vector<DayTrace>& training_days, const Schema& schema,
                         const SmoothingConfig& smoothing) {
  if (training_days.empty()) throw ParameterError("fit_normalizer needs at least one training day");
  const auto F = static_cast<Eigen::Index>(schema.num_channels());
  for (const auto& d : training_days) {
    if (d.values.cols() != F) throw SchemaError("day of system " + d.system_id + " does not match the schema width");
  }
  gaussian_kernel(smoothing.window, smoothing.sigma);  // validates the parameters

  NormStats stats;
  stats.channels = schema.channel_names();
  stats.smooth_window = smoothing.window;
  stats.smooth_sigma = smoothing.sigma;
  for (Eigen::Index f = 0; f < F; ++f) {
    const ChannelSpec& spec = schema.channels[static_cast<std::size_t>(f)];
    ChannelNorm norm{spec.kind, 0.0, 1.0, spec.smooth};
    if (spec.kind == ChannelKind::ZNorm) {
      double sum = 0.0;
      double count = 0.0;
      for (const auto& d : training_days) {
        sum += d.values.col(f).sum();
        count += static_cast<double>(d.values.rows());
      }
      const double mean = sum / count;
      double sq = 0.0;
      for (const auto& d : training_days) sq += (d.values.col(f).array() - mean).square().sum();
      const double sd = std::sqrt(sq / count);
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw DegenerateChannelError(spec.name, "zero standard deviation over the training days");
      }
      norm.offset = mean;
      norm.scale = sd;
    } else {
      double lo = training_days.front().values.col(f).minCoeff();
      double hi = training_days.front().values.col(f).maxCoeff();
      for (const auto& d : training_days) {
        lo = std::min(lo, d.values.col(f).minCoeff());
        hi = std::max(hi, d.values.col(f).maxCoeff());
      }
      if (!(hi > lo)) throw DegenerateChannelError(spec.name, "constant over the training days");
      const double range = hi - lo;
      norm.offset = lo - kMinMaxWidening * range;
      norm.scale = range * (1.0 + 2.0 * kMinMaxWidening);
    }
    stats.norms.push_back(norm);
  }
  return stats;
}

DayMatrix apply_normalizer(const DayMatrix& values, const NormStats& stats) {
  if (values.cols() != static_cast<Eigen::Index>(stats.num_channels())) {
    throw SchemaError("day has " + std::to_string(values.cols()) + " channels, normalizer expects " +
                      std::to_string(stats.num_channels()));
  }
  DayMatrix out(values.rows(), values.cols());
  std::vector<double> column(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index f = 0; f < values.cols(); ++f) {
    const ChannelNorm& norm = stats.norms[static_cast<std::size_t>(f)];
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
      column[static_cast<std::size_t>(t)] = (values(t, f) - norm.offset) / norm.scale;
    }
    if (norm.smooth) column = gaussian_smooth(column, stats.smooth_window, stats.smooth_sigma);
    for (Eigen::Index t = 0; t < values.rows(); ++t) out(t, f) = column[static_cast<std::size_t>(t)];
  }
  return out;
}

DayMatrix invert_normalizer(const DayMatrix& normalized, const NormStats& stats) {
  if (normalized.cols() != static_cast<Eigen::Index>(stats.num_channels())) {
    throw SchemaError("normalized day does not match the normalizer width");
  }
  DayMatrix out(normalized.rows(), normalized.cols());
  for (Eigen::Index f = 0; f < normalized.cols(); ++f) {
    const ChannelNorm& norm = stats.norms[static_cast<std::size_t>(f)];
    out.col(f) = normalized.col(f).array() * norm.scale + norm.offset;
  }
  return out;
}

std::vector<double> gaussian_kernel(int window, double sigma) {
  if (window < 1 || window % 2 == 0) {
    throw ParameterError("smoothing window must be odd and >= 1, got " + std::to_string(window));
  }
  if (!(sigma > 0.0)) throw ParameterError("smoothing sigma must be positive");
  const int half = window / 2;
  std::vector<double> kernel(static_cast<std::size_t>(window));
  double total = 0.0;
  for (int j = -half; j <= half; ++j) {
    const double w = std::exp(-0.5 * (j * j) / (sigma * sigma));
    kernel[static_cast<std::size_t>(j + half)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;
  return kernel;
}

std::vector<double> gaussian_smooth(const std::vector<double>& series, int window, double sigma) {
  const std::vector<double> kernel = gaussian_kernel(window, sigma);
  const int half = window / 2;
  const int n = static_cast<int>(series.size());
  std::vector<double> out(series.size());
  for (int t = 0; t < n; ++t) {
    double acc = 0.0;
    double weight = 0.0;
    for (int j = std::max(-half, -t); j <= std::min(half, n - 1 - t); ++j) {
      const double w = kernel[static_cast<std::size_t>(j + half)];
      acc += w * series[static_cast<std::size_t>(t + j)];
      weight += w;
    }
    out[static_cast<std::size_t>(t)] = acc / weight;
  }
  return out;
}

TokenMatrix tokenize(const DayMatrix& day, const TokenConfig& cfg) {
  const Eigen::Index T = day.rows();
  const Eigen::Index L = cfg.token_length;
  if (L <= 0 || T % L != 0) {
    throw ShapeError("token length " + std::to_string(L) + " does not divide " + std::to_string(T) + " timesteps");
  }
  // Row-major storage already lays minutes out consecutively.
  return Eigen::Map<const TokenMatrix>(day.data(), T / L, L * day.cols());
}

DayMatrix detokenize(const TokenMatrix& tokens, const TokenConfig& cfg, int num_features) {
  const Eigen::Index L = cfg.token_length;
  if (L <= 0 || num_features <= 0 || tokens.cols() != L * num_features) {
    throw ShapeError("token width " + std::to_string(tokens.cols()) + " != token_length * features");
  }
  return Eigen::Map<const DayMatrix>(tokens.data(), tokens.rows() * L, num_features);
}

}  // namespace stsad
