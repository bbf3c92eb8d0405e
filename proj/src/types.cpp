#include "stsad/types.hpp"

#include "stsad/error.hpp"

#include <string>

namespace stsad {

std::string_view to_string(DayLabel label) {
  switch (label) {
    case DayLabel::Normal:
      return "Normal";
    case DayLabel::Merk:
      return "Merk";
    case DayLabel::Fault:
      return "Fault";
  }
  return "Normal";
}

DayLabel parse_day_label(std::string_view text) {
  if (text == "Normal") return DayLabel::Normal;
  if (text == "Merk") return DayLabel::Merk;
  if (text == "Fault") return DayLabel::Fault;
  throw SchemaError("unknown day label '" + std::string(text) + "'");
}

std::string_view to_string(ChannelKind kind) {
  return kind == ChannelKind::ZNorm ? "znorm" : "minmax";
}

ChannelKind parse_channel_kind(std::string_view text) {
  if (text == "znorm") return ChannelKind::ZNorm;
  if (text == "minmax") return ChannelKind::MinMax;
  throw SchemaError("unknown channel kind '" + std::string(text) + "'");
}

}  // namespace stsad
