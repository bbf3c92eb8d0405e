#include "stsad/scoring.hpp"

#include "stsad/dataset_io.hpp"
#include "stsad/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace stsad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lengths(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
}

std::size_t count_positives(const std::vector<int>& labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string_view to_string(MerkMode mode) {
  switch (mode) {
    case MerkMode::Exclude:
      return "exclude";
    case MerkMode::Negative:
      return "negative";
    case MerkMode::Positive:
      return "positive";
  }
  return "exclude";
}

MerkMode parse_merk_mode(std::string_view text) {
  if (text == "exclude") return MerkMode::Exclude;
  if (text == "negative") return MerkMode::Negative;
  if (text == "positive") return MerkMode::Positive;
  throw ParameterError("unknown merk mode '" + std::string(text) + "' (exclude|negative|positive)");
}

void AnomalyScoreSeries::validate() const {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& e : entries) {
    if (!std::isfinite(e.score)) {
      throw ParameterError("non-finite score for " + e.system_id + " on " + format_date(e.date));
    }
    if (!seen.emplace(e.system_id, e.date.time_since_epoch().count()).second) {
      throw ParameterError("duplicate score entry for " + e.system_id + " on " + format_date(e.date));
    }
  }
}

void write_scores(std::ostream& out, const AnomalyScoreSeries& series) {
  out << "system_id,date,day_index,score,label\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : series.entries) {
    out << e.system_id << ',' << format_date(e.date) << ',' << e.day_index << ',' << e.score << ','
        << to_string(e.label) << '\n';
  }
}

AnomalyScoreSeries read_scores(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty score file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "system_id,date,day_index,score,label") throw ParseError(1, "unexpected score header '" + line + "'");
  AnomalyScoreSeries series;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw ParseError(lineno, "expected 5 fields, got " + std::to_string(f.size()));
    ScoreEntry e;
    e.system_id = f[0];
    try {
      e.date = parse_date(f[1]);
      std::size_t used = 0;
      e.day_index = std::stoi(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("day_index");
      e.score = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("score");
      e.label = parse_day_label(f[4]);
    } catch (const std::exception& ex) {
      throw ParseError(lineno, std::string("bad score row: ") + ex.what());
    }
    series.entries.push_back(std::move(e));
  }
  series.validate();
  return series;
}

void save_scores(const std::filesystem::path& path, const AnomalyScoreSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_scores(out, series);
}

AnomalyScoreSeries load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open score file " + path.string());
  return read_scores(in);
}

BinaryScores binarize(const AnomalyScoreSeries& series, MerkMode mode) {
  BinaryScores out;
  for (const auto& e : series.entries) {
    int label = e.label == DayLabel::Fault ? 1 : 0;
    if (e.label == DayLabel::Merk) {
      if (mode == MerkMode::Exclude) {
        ++out.excluded;
        continue;
      }
      label = mode == MerkMode::Positive ? 1 : 0;
    }
    out.scores.push_back(e.score);
    out.labels.push_back(label);
    out.systems.push_back(e.system_id);
  }
  return out;
}

double nll_day_score(const DayMatrix& x, const GaussianField& recon, DayPooling pooling) {
  const DayMatrix nll = gaussian_nll(x, recon);
  return pooling == DayPooling::Mean ? nll.mean() : nll.maxCoeff();
}

double error_day_score(const DayMatrix& errors, DayPooling pooling) {
  if (errors.size() == 0) throw ShapeError("empty error matrix");
  return pooling == DayPooling::Mean ? errors.mean() : errors.maxCoeff();
}

std::vector<int> threshold_classify(const std::vector<double>& scores, double threshold) {
  std::vector<int> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), [threshold](double s) { return s > threshold ? 1 : 0; });
  return out;
}

std::vector<int> threshold_classify(const AnomalyScoreSeries& series, double threshold) {
  std::vector<double> scores;
  for (const auto& e : series.entries) scores.push_back(e.score);
  return threshold_classify(scores, threshold);
}

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  check_lengths(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    const bool positive = labels[i] != 0;
    if (predicted && positive) ++c.tp;
    else if (predicted) ++c.fp;
    else if (positive) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(const Confusion& c) {
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

F1Result optimal_f1(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores, labels);
  const std::size_t P = count_positives(labels);
  if (P == 0) throw MetricError("optimal F1 is undefined without positive days");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  Confusion c;
  c.tp = P;
  c.fp = scores.size() - P;
  F1Result best{f1_score(c), -kInf};
  // Walk thresholds upwards; each step drops one group of tied scores.
  std::size_t i = 0;
  while (i < order.size()) {
    const double value = scores[order[i]];
    while (i < order.size() && scores[order[i]] == value) {
      if (labels[order[i]] != 0) {
        --c.tp;
        ++c.fn;
      } else {
        --c.fp;
        ++c.tn;
      }
      ++i;
    }
    const double threshold = i < order.size() ? value + (scores[order[i]] - value) / 2.0 : kInf;
    const double f1 = f1_score(c);
    if (f1 > best.f1) best = {f1, threshold};
  }
  return best;
}

SystemWiseResult system_wise_f1(const std::vector<double>& scores, const std::vector<int>& labels,
                                const std::vector<std::string>& systems, SystemEligibility eligibility) {
  check_lengths(scores, labels);
  if (systems.size() != scores.size()) throw ShapeError("scores and system ids differ in length");
  std::vector<std::string> ids(systems);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw MetricError("system-wise F1 needs at least two systems");

  SystemWiseResult result;
  double sum = 0.0;
  std::size_t eligible = 0;
  for (const auto& id : ids) {
    std::vector<double> other_scores, own_scores;
    std::vector<int> other_labels, own_labels;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (systems[i] == id) {
        own_scores.push_back(scores[i]);
        own_labels.push_back(labels[i]);
      } else {
        other_scores.push_back(scores[i]);
        other_labels.push_back(labels[i]);
      }
    }
    SystemF1Row row;
    row.system_id = id;
    row.days = own_scores.size();
    row.threshold = count_positives(other_labels) > 0 ? optimal_f1(other_scores, other_labels).threshold : kInf;
    const Confusion c = confusion_at(own_scores, own_labels, row.threshold);
    row.positives = c.tp + c.fn;
    row.predicted = c.tp + c.fp;
    if (row.positives > 0) {
      row.f1 = f1_score(c);
    } else if (eligibility == SystemEligibility::CleanCountsAsOne) {
      row.f1 = c.fp == 0 ? 1.0 : 0.0;
    }
    if (row.f1) {
      sum += *row.f1;
      ++eligible;
    }
    result.rows.push_back(std::move(row));
  }
  if (eligible == 0) throw MetricError("system-wise F1 is undefined: no system has positive days");
  result.mean_f1 = sum / static_cast<double>(eligible);
  return result;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores, labels);
  const std::size_t P = count_positives(labels);
  const std::size_t N = scores.size() - P;
  if (P == 0 || N == 0) throw MetricError("AUC-ROC needs both positive and negative days");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the mid-rank keeps the rank sum integral.
  std::size_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::size_t twice_mid = i + 1 + j;  // 2 * ((i+1) + j) / 2
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) twice_rank_sum += twice_mid;
    i = j;
  }
  const double u = (static_cast<double>(twice_rank_sum) - static_cast<double>(P) * static_cast<double>(P + 1)) / 2.0;
  return u / (static_cast<double>(P) * static_cast<double>(N));
}

double auc_pr(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths(scores, labels);
  const std::size_t P = count_positives(labels);
  if (P == 0) throw MetricError("AUC-PR is undefined without positive days");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0, fp = 0, prev_tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double value = scores[order[i]];
    while (i < order.size() && scores[order[i]] == value) {
      if (labels[order[i]] != 0) ++tp;
      else ++fp;
      ++i;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += static_cast<double>(tp - prev_tp) / static_cast<double>(P) * precision;
    prev_tp = tp;
  }
  return ap;
}

KFoldResult kfold_f1(const std::vector<double>& scores, const std::vector<int>& labels, int k, std::mt19937_64& rng) {
  check_lengths(scores, labels);
  if (k < 2) throw ParameterError("k-fold evaluation needs k >= 2");
  if (scores.size() < static_cast<std::size_t>(k)) throw ParameterError("fewer days than folds");
  std::vector<std::size_t> perm(scores.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(scores.size());
  for (std::size_t i = 0; i < perm.size(); ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

  KFoldResult result;
  double f1_sum = 0.0, threshold_sum = 0.0;
  for (int f = 0; f < k; ++f) {
    std::vector<double> fit_s, held_s;
    std::vector<int> fit_l, held_l;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (fold[i] == f) {
        held_s.push_back(scores[i]);
        held_l.push_back(labels[i]);
      } else {
        fit_s.push_back(scores[i]);
        fit_l.push_back(labels[i]);
      }
    }
    if (count_positives(fit_l) == 0) {
      result.skipped_folds.push_back(f);
      continue;
    }
    const double threshold = optimal_f1(fit_s, fit_l).threshold;
    const Confusion c = confusion_at(held_s, held_l, threshold);
    double f1 = 0.0;
    if (c.tp + c.fn == 0) {
      if (c.fp != 0) {
        result.skipped_folds.push_back(f);
        continue;
      }
      f1 = 1.0;
    } else {
      f1 = f1_score(c);
    }
    f1_sum += f1;
    threshold_sum += threshold;
    ++result.folds_used;
  }
  if (result.folds_used == 0) throw MetricError("k-fold F1 is undefined: every fold was skipped");
  result.mean_f1 = f1_sum / result.folds_used;
  result.mean_threshold = threshold_sum / result.folds_used;
  return result;
}

std::vector<double> score_cap_for_display(const std::vector<double>& scores, double cap) {
  if (!(cap > 0.0)) throw ParameterError("display cap must be positive");
  std::vector<double> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), [cap](double s) { return std::min(s, cap); });
  return out;
}

AnomalyScoreSeries score_cap_for_display(const AnomalyScoreSeries& series, double cap) {
  if (!(cap > 0.0)) throw ParameterError("display cap must be positive");
  AnomalyScoreSeries out = series;
  for (auto& e : out.entries) e.score = std::min(e.score, cap);
  return out;
}

namespace {

template <typename Fn>
MetricValue try_metric(Fn&& fn) {
  MetricValue v;
  try {
    v.value = fn();
  } catch (const MetricError& e) {
    v.error = e.what();
  }
  return v;
}

nlohmann::json metric_json(const MetricValue& v) {
  if (v.value) return *v.value;
  return nlohmann::json{{"undefined", v.error}};
}

nlohmann::json number_or_string(double x) {
  if (std::isfinite(x)) return x;
  return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
}

std::string fmt(const MetricValue& v) {
  if (!v.value) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << *v.value;
  return s.str();
}

}  // namespace

EvalReport evaluate(const AnomalyScoreSeries& series, const EvalOptions& opts, std::string detector) {
  series.validate();
  const BinaryScores b = binarize(series, opts.merk);
  EvalReport r;
  r.detector = std::move(detector);
  r.merk = opts.merk;
  r.positives = count_positives(b.labels);
  r.negatives = b.labels.size() - r.positives;
  r.excluded = b.excluded;
  r.optimal_f1 = try_metric([&] {
    const F1Result f = optimal_f1(b.scores, b.labels);
    r.threshold = f.threshold;
    return f.f1;
  });
  r.system_wise_f1 = try_metric([&] {
    SystemWiseResult s = system_wise_f1(b.scores, b.labels, b.systems, opts.eligibility);
    r.systems = std::move(s.rows);
    return s.mean_f1;
  });
  r.auc_pr = try_metric([&] { return auc_pr(b.scores, b.labels); });
  r.auc_roc = try_metric([&] { return auc_roc(b.scores, b.labels); });
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["detector"] = detector;
  j["merk_mode"] = std::string(to_string(merk));
  j["positives"] = positives;
  j["negatives"] = negatives;
  j["excluded_days"] = excluded;
  j["optimal_f1"] = metric_json(optimal_f1);
  j["optimal_threshold"] = number_or_string(threshold);
  j["system_wise_f1"] = metric_json(system_wise_f1);
  j["auc_pr"] = metric_json(auc_pr);
  j["auc_roc"] = metric_json(auc_roc);
  j["systems"] = nlohmann::json::array();
  for (const auto& s : systems) {
    j["systems"].push_back({{"system_id", s.system_id},
                            {"days", s.days},
                            {"positives", s.positives},
                            {"predicted", s.predicted},
                            {"threshold", number_or_string(s.threshold)},
                            {"f1", s.f1 ? nlohmann::json(*s.f1) : nlohmann::json(nullptr)}});
  }
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "detector        " << (detector.empty() ? "-" : detector) << '\n';
  out << "merk mode       " << to_string(merk) << " (" << excluded << " days excluded)\n";
  out << "days            " << positives << " positive / " << negatives << " negative\n";
  out << "optimal F1      " << fmt(optimal_f1);
  if (optimal_f1.value) out << "  (threshold " << threshold << ')';
  out << '\n';
  out << "system-wise F1  " << fmt(system_wise_f1) << '\n';
  out << "AUC-PR          " << fmt(auc_pr) << '\n';
  out << "AUC-ROC         " << fmt(auc_roc) << '\n';
  if (!systems.empty()) {
    out << "\nsystem      days  pos  pred  F1\n";
    for (const auto& s : systems) {
      out << std::left << std::setw(10) << s.system_id << std::right << std::setw(6) << s.days << std::setw(5)
          << s.positives << std::setw(6) << s.predicted << "  "
          << (s.f1 ? fmt(MetricValue{s.f1, {}}) : std::string("excluded")) << '\n';
    }
  }
  return out.str();
}

std::vector<SeedAggregate> aggregate_reports(const std::vector<EvalReport>& reports) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalReport*>> groups;
  for (const auto& r : reports) {
    if (!groups.count(r.detector)) order.push_back(r.detector);
    groups[r.detector].push_back(&r);
  }
  std::vector<SeedAggregate> out;
  for (const auto& name : order) {
    SeedAggregate a;
    a.detector = name;
    a.runs = static_cast<int>(groups[name].size());
    for (int m = 0; m < 4; ++m) {
      std::vector<double> xs;
      for (const auto* r : groups[name]) {
        const MetricValue* v[4] = {&r->optimal_f1, &r->system_wise_f1, &r->auc_pr, &r->auc_roc};
        if (v[m]->value) xs.push_back(*v[m]->value);
      }
      if (xs.empty()) {
        a.mean[m] = a.std[m] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      double sq = 0.0;
      for (double x : xs) sq += (x - mean) * (x - mean);
      a.mean[m] = mean;
      a.std[m] = std::sqrt(sq / static_cast<double>(xs.size()));
    }
    out.push_back(a);
  }
  return out;
}

std::string comparison_table(const std::vector<SeedAggregate>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "detector" << std::right << std::setw(6) << "runs" << std::setw(18)
      << "optimal F1" << std::setw(18) << "system-wise F1" << std::setw(18) << "AUC-PR" << std::setw(18) << "AUC-ROC"
      << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    out << std::left << std::setw(20) << r.detector << std::right << std::setw(6) << r.runs;
    for (int m = 0; m < 4; ++m) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << r.mean[m] << " ± " << r.std[m];
      out << std::setw(19) << cell.str();
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace stsad
