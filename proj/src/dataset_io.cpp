#include "stsad/dataset_io.hpp"

#include "stsad/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace stsad {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::string word;
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

std::string_view strip_comment(std::string_view line) {
  const auto pos = line.find('#');
  return trim(pos == std::string_view::npos ? line : line.substr(0, pos));
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::vector<std::string> Schema::channel_names() const {
  std::vector<std::string> names;
  names.reserve(channels.size());
  for (const auto& c : channels) names.push_back(c.name);
  return names;
}

Schema Schema::parse(std::istream& in) {
  Schema schema;
  enum class Section { None, Channels, Status } section = Section::None;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_comment(raw);
    if (line.empty()) continue;
    if (line == "[channels]") {
      section = Section::Channels;
      continue;
    }
    if (line == "[status]") {
      section = Section::Status;
      continue;
    }
    const auto words = split_words(line);
    if (section == Section::Channels) {
      if (words.size() < 2 || words.size() > 3 || (words.size() == 3 && words[2] != "smooth")) {
        throw SchemaError("schema line " + std::to_string(line_no) + ": expected '<name> <znorm|minmax> [smooth]'");
      }
      schema.channels.push_back({words[0], parse_channel_kind(words[1]), words.size() == 3});
    } else if (section == Section::Status) {
      if (words.size() != 2 || (words[1] != "fault" && words[1] != "merk")) {
        throw SchemaError("schema line " + std::to_string(line_no) + ": expected '<name> <fault|merk>'");
      }
      schema.statuses.push_back({words[0], words[1] == "fault" ? StatusRole::Fault : StatusRole::Merk});
    } else {
      throw SchemaError("schema line " + std::to_string(line_no) + ": entry outside [channels]/[status] section");
    }
  }
  if (schema.channels.empty()) throw SchemaError("schema names no channels");
  std::set<std::string> seen;
  for (const auto& c : schema.channels) {
    if (!seen.insert(c.name).second) throw SchemaError("channel '" + c.name + "' listed twice");
  }
  for (const auto& s : schema.statuses) {
    if (!seen.insert(s.name).second) throw SchemaError("column '" + s.name + "' listed twice");
  }
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open schema file " + path.string());
  return parse(in);
}

void Schema::write(std::ostream& out) const {
  out << "[channels]\n";
  for (const auto& c : channels) {
    out << c.name << ' ' << to_string(c.kind) << (c.smooth ? " smooth" : "") << '\n';
  }
  out << "[status]\n";
  for (const auto& s : statuses) {
    out << s.name << ' ' << (s.role == StatusRole::Fault ? "fault" : "merk") << '\n';
  }
}

Schema Schema::solar_thermal() {
  Schema schema;
  for (const char* name : {"TSA1", "TSE", "TW", "TSV", "TAM"}) {
    schema.channels.push_back({name, ChannelKind::ZNorm, false});
  }
  for (const char* name : {"VF", "pwm", "ctr"}) {
    schema.channels.push_back({name, ChannelKind::MinMax, true});
  }
  schema.statuses = {{"sto", StatusRole::Fault}, {"Merk", StatusRole::Merk}};
  return schema;
}

std::string DayTrace::date_string() const { return format_date(date); }

std::int64_t parse_timestamp(std::string_view text) {
  // YYYY-MM-DD[T ]HH:MM[:SS]
  text = trim(text);
  if (text.size() != 16 && text.size() != 19) throw std::invalid_argument("bad timestamp length");
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') {
    throw std::invalid_argument("bad timestamp separators");
  }
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), mo) ||
      !parse_number(text.substr(8, 2), d) || !parse_number(text.substr(11, 2), h) ||
      !parse_number(text.substr(14, 2), mi)) {
    throw std::invalid_argument("bad timestamp digits");
  }
  if (text.size() == 19) {
    if (text[16] != ':' || !parse_number(text.substr(17, 2), s)) throw std::invalid_argument("bad seconds");
    if (s != 0) throw std::invalid_argument("timestamp is not on a minute boundary");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59) throw std::invalid_argument("timestamp out of range");
  const std::int64_t day = std::chrono::sys_days(ymd).time_since_epoch().count();
  return day * kMinutesPerDay + h * 60 + mi;
}

std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::chrono::sys_days parse_date(std::string_view text) {
  const std::int64_t minutes = parse_timestamp(std::string(trim(text)) + "T00:00");
  return std::chrono::sys_days(std::chrono::days(floor_div(minutes, kMinutesPerDay)));
}

std::string format_timestamp(std::int64_t minutes) {
  const std::int64_t day = floor_div(minutes, kMinutesPerDay);
  const std::int64_t minute_of_day = minutes - day * kMinutesPerDay;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(minute_of_day / 60),
                static_cast<int>(minute_of_day % 60));
  return format_date(std::chrono::sys_days(std::chrono::days(day))) + "T" + buf;
}

SystemRecord parse_system_csv(std::istream& in, const Schema& schema) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header row");
  const auto header = split_fields(line, ',');
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(std::string(header[i]), i);

  auto find_column = [&](const std::string& name, const char* what) {
    const auto it = column.find(name);
    if (it == column.end()) throw SchemaError(std::string(what) + " '" + name + "' not present in CSV header");
    return it->second;
  };
  const std::size_t ts_col = find_column("timestamp", "index column");
  const std::size_t id_col = find_column("system_id", "index column");
  std::vector<std::size_t> channel_cols;
  for (const auto& c : schema.channels) channel_cols.push_back(find_column(c.name, "channel"));
  std::vector<std::size_t> status_cols;
  for (const auto& s : schema.statuses) status_cols.push_back(find_column(s.name, "status column"));

  SystemRecord record;
  record.channel_names = schema.channel_names();
  record.statuses = schema.statuses;
  const std::size_t F = channel_cols.size();
  const std::size_t S = status_cols.size();
  std::vector<double> values;
  std::vector<int> flags;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    std::int64_t minute = 0;
    try {
      minute = parse_timestamp(fields[ts_col]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, "invalid timestamp '" + std::string(fields[ts_col]) + "' (" + e.what() + ")");
    }
    if (record.minutes.empty()) {
      record.system_id = std::string(fields[id_col]);
      if (record.system_id.empty()) throw ParseError(line_no, "empty system_id");
    } else if (fields[id_col] != record.system_id) {
      throw ParseError(line_no, "system_id '" + std::string(fields[id_col]) + "' differs from '" +
                                    record.system_id + "'");
    }
    if (!record.minutes.empty() && minute <= record.minutes.back()) {
      if (minute == record.minutes.back()) {
        throw OrderingError("duplicate timestamp " + format_timestamp(minute) + " at line " + std::to_string(line_no));
      }
      throw OrderingError("timestamp " + format_timestamp(minute) + " at line " + std::to_string(line_no) +
                          " precedes " + format_timestamp(record.minutes.back()));
    }
    record.minutes.push_back(minute);
    for (std::size_t f = 0; f < F; ++f) {
      double v = 0.0;
      if (!parse_number(fields[channel_cols[f]], v) || !std::isfinite(v)) {
        throw ParseError(line_no, "invalid value '" + std::string(fields[channel_cols[f]]) + "' for channel " +
                                      schema.channels[f].name);
      }
      values.push_back(v);
    }
    for (std::size_t s = 0; s < S; ++s) {
      double v = 0.0;
      if (!parse_number(fields[status_cols[s]], v) || v != std::floor(v)) {
        throw ParseError(line_no, "invalid status flag '" + std::string(fields[status_cols[s]]) + "' for " +
                                      schema.statuses[s].name);
      }
      flags.push_back(static_cast<int>(v));
    }
  }

  const auto rows = static_cast<Eigen::Index>(record.minutes.size());
  record.values = Eigen::Map<const DayMatrix>(values.data(), rows, static_cast<Eigen::Index>(F));
  record.status_flags = Eigen::Map<const StatusMatrix>(flags.data(), rows, static_cast<Eigen::Index>(S));
  return record;
}

SystemRecord load_system_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open " + path.string());
  return parse_system_csv(in, schema);
}

DayLabel label_day(const StatusMatrix& status_flags, const std::vector<StatusSpec>& statuses) {
  if (statuses.empty() || status_flags.cols() != static_cast<Eigen::Index>(statuses.size())) {
    throw SchemaError("status flags do not match the schema's status columns");
  }
  bool merk = false;
  for (Eigen::Index s = 0; s < status_flags.cols(); ++s) {
    if ((status_flags.col(s).array() != 0).any()) {
      if (statuses[static_cast<std::size_t>(s)].role == StatusRole::Fault) return DayLabel::Fault;
      merk = true;
    }
  }
  return merk ? DayLabel::Merk : DayLabel::Normal;
}

AssembledDays assemble_days(const SystemRecord& record) {
  AssembledDays out;
  const std::size_t n = record.num_rows();
  std::size_t start = 0;
  while (start < n) {
    const std::int64_t day = floor_div(record.minutes[start], kMinutesPerDay);
    std::size_t end = start;
    while (end < n && floor_div(record.minutes[end], kMinutesPerDay) == day) ++end;
    if (end - start == static_cast<std::size_t>(kMinutesPerDay)) {
      DayTrace trace;
      trace.system_id = record.system_id;
      trace.date = std::chrono::sys_days(std::chrono::days(day));
      const auto row = static_cast<Eigen::Index>(start);
      trace.values = record.values.middleRows(row, kMinutesPerDay);
      trace.status_flags = record.status_flags.middleRows(row, kMinutesPerDay);
      trace.label = record.statuses.empty() ? DayLabel::Normal : label_day(trace.status_flags, record.statuses);
      out.days.push_back(std::move(trace));
    } else {
      ++out.dropped_days;
    }
    start = end;
  }
  return out;
}

DatasetSplit DatasetSplit::parse(std::istream& in) {
  DatasetSplit split;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_comment(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw SplitError("split line " + std::to_string(line_no) + ": expected '<set>: <ids...>'");
    }
    const std::string_view key = trim(line.substr(0, colon));
    std::set<std::string>* target = nullptr;
    if (key == "train") target = &split.train;
    else if (key == "validation") target = &split.validation;
    else if (key == "test") target = &split.test;
    else throw SplitError("split line " + std::to_string(line_no) + ": unknown set '" + std::string(key) + "'");
    for (auto& id : split_words(line.substr(colon + 1))) target->insert(std::move(id));
  }
  return split;
}

DatasetSplit DatasetSplit::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open split file " + path.string());
  return parse(in);
}

void DatasetSplit::write(std::ostream& out) const {
  auto emit = [&](const char* key, const std::set<std::string>& ids) {
    out << key << ':';
    for (const auto& id : ids) out << ' ' << id;
    out << '\n';
  };
  emit("train", train);
  emit("validation", validation);
  emit("test", test);
}

DatasetSplit DatasetSplit::reference() {
  DatasetSplit split;
  split.train = {"001", "013", "023", "025", "033", "035", "041", "043", "049", "053",
                 "058", "060", "062", "069", "075", "077", "105", "106", "110", "116",
                 "126", "138", "146", "150", "173", "175", "193", "902", "904", "905"};
  split.validation = {"026", "038", "046", "063", "074", "076", "114", "118", "136"};
  split.test = {"002", "003", "005", "007", "012", "014", "015", "016", "027", "028", "029",
                "030", "031", "034", "036", "037", "040", "044", "045", "047", "048", "050",
                "051", "052", "054", "059", "061", "064", "065", "067", "068", "070", "072",
                "107", "119", "144", "149", "154", "158", "166", "169", "179", "181", "903"};
  return split;
}

PartitionedDays split_dataset(const std::vector<DayTrace>& days, const DatasetSplit& split) {
  auto check_disjoint = [](const std::set<std::string>& a, const std::set<std::string>& b, const char* na,
                           const char* nb) {
    for (const auto& id : a) {
      if (b.count(id)) throw SplitError("system " + id + " appears in both " + na + " and " + nb);
    }
  };
  check_disjoint(split.train, split.validation, "train", "validation");
  check_disjoint(split.train, split.test, "train", "test");
  check_disjoint(split.validation, split.test, "validation", "test");

  std::set<std::string> present;
  for (const auto& d : days) present.insert(d.system_id);
  for (const auto* set : {&split.train, &split.validation, &split.test}) {
    for (const auto& id : *set) {
      if (!present.count(id)) throw LookupError("split references unknown system " + id);
    }
  }

  PartitionedDays out;
  for (const auto& d : days) {
    if (split.train.count(d.system_id)) {
      if (d.label == DayLabel::Normal) out.train.push_back(d);
    } else if (split.validation.count(d.system_id)) {
      if (d.label == DayLabel::Normal) out.validation.push_back(d);
    } else if (split.test.count(d.system_id)) {
      out.test.push_back(d);
    }
  }
  return out;
}

LoadedDataset load_dataset_dir(const std::filesystem::path& dir, const Schema& schema) {
  if (!std::filesystem::is_directory(dir)) throw LookupError("data directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  LoadedDataset out;
  for (const auto& file : files) {
    const SystemRecord record = load_system_csv(file, schema);
    AssembledDays assembled = assemble_days(record);
    out.summaries.push_back({record.system_id, assembled.days.size(), assembled.dropped_days});
    for (auto& d : assembled.days) out.days.push_back(std::move(d));
  }
  return out;
}

void write_ingest_report(std::ostream& out, const std::vector<IngestSummary>& summaries) {
  out << "system_id,days_kept,days_dropped\n";
  for (const auto& s : summaries) out << s.system_id << ',' << s.days_kept << ',' << s.days_dropped << '\n';
}

}  // namespace stsad
