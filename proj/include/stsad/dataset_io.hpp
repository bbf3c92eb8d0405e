#pragma once

#include "stsad/types.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace stsad {

struct ChannelSpec {
  std::string name;
  ChannelKind kind = ChannelKind::ZNorm;
  bool smooth = false;
};

struct StatusSpec {
  std::string name;
  StatusRole role = StatusRole::Fault;
};

/// Names the F model channels (in model order) and the status columns.
///
/// Text form, one entry per line, '#' starts a comment:
///
///     [channels]
///     TSA1 znorm
///     VF minmax smooth
///     [status]
///     sto fault
///     Merk merk
struct Schema {
  std::vector<ChannelSpec> channels;
  std::vector<StatusSpec> statuses;

  std::size_t num_channels() const { return channels.size(); }
  std::vector<std::string> channel_names() const;

  static Schema parse(std::istream& in);
  static Schema load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  /// TSA1, TSE, TW, TSV, TAM (z-normalized) and VF, pwm, ctr (min-max,
  /// smoothed); status columns sto (fault) and Merk.
  static Schema solar_thermal();
};

/// Raw per-minute rows of one system, in strictly increasing time order.
struct SystemRecord {
  std::string system_id;
  std::vector<std::string> channel_names;
  std::vector<StatusSpec> statuses;
  std::vector<std::int64_t> minutes;  // minutes since 1970-01-01T00:00
  DayMatrix values;                   // rows x F
  StatusMatrix status_flags;          // rows x S

  std::size_t num_rows() const { return minutes.size(); }
};

struct DayTrace {
  std::string system_id;
  std::chrono::sys_days date;
  DayMatrix values;           // 1440 x F
  StatusMatrix status_flags;  // 1440 x S
  DayLabel label = DayLabel::Normal;

  std::string date_string() const;
};

struct AssembledDays {
  std::vector<DayTrace> days;
  std::size_t dropped_days = 0;
};

struct DatasetSplit {
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;

  /// Whitespace/comma separated ids after `train:`, `validation:`, `test:`.
  static DatasetSplit parse(std::istream& in);
  static DatasetSplit load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  /// System lists of the public dataset's reference split.
  static DatasetSplit reference();
};

struct PartitionedDays {
  std::vector<DayTrace> train;
  std::vector<DayTrace> validation;
  std::vector<DayTrace> test;
};

struct IngestSummary {
  std::string system_id;
  std::size_t days_kept = 0;
  std::size_t days_dropped = 0;
};

/// Parses a minute-resolution ISO-8601 timestamp ("2021-03-04T05:06",
/// optional ":00" seconds, 'T' or ' ' separator) into minutes since epoch.
std::int64_t parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t minutes);
std::string format_date(std::chrono::sys_days day);
std::chrono::sys_days parse_date(std::string_view text);

/// Header must name `timestamp`, `system_id`, every schema channel and
/// every schema status column; other columns pass through unread.
SystemRecord parse_system_csv(std::istream& in, const Schema& schema);
SystemRecord load_system_csv(const std::filesystem::path& path, const Schema& schema);

/// One DayTrace per calendar day with all 1440 minutes present.
AssembledDays assemble_days(const SystemRecord& record);

/// Fault if any minute raises a fault-role flag, else Merk if any minute
/// raises a merk-role flag, else Normal.
DayLabel label_day(const StatusMatrix& status_flags, const std::vector<StatusSpec>& statuses);

/// Training and validation keep only Normal days; test keeps everything.
PartitionedDays split_dataset(const std::vector<DayTrace>& days, const DatasetSplit& split);

struct LoadedDataset {
  std::vector<DayTrace> days;
  std::vector<IngestSummary> summaries;
};

/// Loads every `*.csv` in `dir` (sorted by file name) as one system each.
LoadedDataset load_dataset_dir(const std::filesystem::path& dir, const Schema& schema);

void write_ingest_report(std::ostream& out, const std::vector<IngestSummary>& summaries);

}  // namespace stsad
