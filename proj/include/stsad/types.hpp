#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>

namespace stsad {

inline constexpr int kMinutesPerDay = 1440;

/// Row-major T x F matrix; row t holds all channels of minute t.
using DayMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StatusMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class DayLabel { Normal, Merk, Fault };

enum class ChannelKind { ZNorm, MinMax };

enum class StatusRole { Fault, Merk };

std::string_view to_string(DayLabel label);
DayLabel parse_day_label(std::string_view text);

std::string_view to_string(ChannelKind kind);
ChannelKind parse_channel_kind(std::string_view text);

}  // namespace stsad
