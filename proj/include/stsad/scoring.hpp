#pragma once

#include "stsad/types.hpp"
#include "stsad/vae.hpp"

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace stsad {

/// How days carrying the controller's weak "Merk" flag enter the metrics.
enum class MerkMode { Exclude, Negative, Positive };

std::string_view to_string(MerkMode mode);
MerkMode parse_merk_mode(std::string_view text);

enum class DayPooling { Mean, Max };

struct ScoreEntry {
  std::string system_id;
  std::chrono::sys_days date;
  int day_index = 0;
  double score = 0.0;
  DayLabel label = DayLabel::Normal;
};

/// Per-day anomaly scores; (system_id, date) pairs are unique and scores
/// finite.
struct AnomalyScoreSeries {
  std::vector<ScoreEntry> entries;

  void validate() const;
  std::size_t size() const { return entries.size(); }
};

/// CSV columns: system_id,date,day_index,score,label.
void write_scores(std::ostream& out, const AnomalyScoreSeries& series);
AnomalyScoreSeries read_scores(std::istream& in);
void save_scores(const std::filesystem::path& path, const AnomalyScoreSeries& series);
AnomalyScoreSeries load_scores(const std::filesystem::path& path);

/// Binary view of a series after applying the Merk mode.
struct BinaryScores {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> systems;
  std::size_t excluded = 0;
};

BinaryScores binarize(const AnomalyScoreSeries& series, MerkMode mode = MerkMode::Exclude);

/// Mean (or max) of the per-entry Gaussian NLL.
double nll_day_score(const DayMatrix& x, const GaussianField& recon, DayPooling pooling = DayPooling::Mean);

/// Mean (or max) of an error matrix.
double error_day_score(const DayMatrix& errors, DayPooling pooling = DayPooling::Mean);

/// Anomalous iff score > threshold.
std::vector<int> threshold_classify(const std::vector<double>& scores, double threshold);
std::vector<int> threshold_classify(const AnomalyScoreSeries& series, double threshold);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);

/// 2TP / (2TP + FP + FN); 0 when TP = 0.
double f1_score(const Confusion& c);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;
};

/// Exact maximum over -inf, midpoints of sorted unique scores, and +inf;
/// ties go to the smallest threshold.
F1Result optimal_f1(const std::vector<double>& scores, const std::vector<int>& labels);

enum class SystemEligibility { ExcludeWithoutPositives, CleanCountsAsOne };

struct SystemF1Row {
  std::string system_id;
  double threshold = 0.0;
  std::size_t days = 0;
  std::size_t positives = 0;
  std::size_t predicted = 0;
  std::optional<double> f1;  // empty when the system is not eligible
};

struct SystemWiseResult {
  double mean_f1 = 0.0;
  std::vector<SystemF1Row> rows;
};

/// Leave-one-system-out: each system is scored with the optimal threshold of
/// all other systems pooled (+inf if those contain no positives).
SystemWiseResult system_wise_f1(const std::vector<double>& scores, const std::vector<int>& labels,
                                const std::vector<std::string>& systems,
                                SystemEligibility eligibility = SystemEligibility::ExcludeWithoutPositives);

/// Mann-Whitney statistic; ties count one half.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Step-wise average precision over distinct thresholds.
double auc_pr(const std::vector<double>& scores, const std::vector<int>& labels);

struct KFoldResult {
  double mean_f1 = 0.0;
  double mean_threshold = 0.0;
  int folds_used = 0;
  std::vector<int> skipped_folds;
};

/// Random day-level partition into k folds; each fold is scored with the
/// optimal threshold of the remaining folds. A held-out fold without
/// positives counts F1 = 1 when nothing is predicted and is skipped
/// otherwise, as is a fold whose complement has no positives.
KFoldResult kfold_f1(const std::vector<double>& scores, const std::vector<int>& labels, int k, std::mt19937_64& rng);

/// min(score, cap), for plotting only.
std::vector<double> score_cap_for_display(const std::vector<double>& scores, double cap);
AnomalyScoreSeries score_cap_for_display(const AnomalyScoreSeries& series, double cap);

struct EvalOptions {
  MerkMode merk = MerkMode::Exclude;
  SystemEligibility eligibility = SystemEligibility::ExcludeWithoutPositives;
};

/// A metric value or the reason it is undefined.
struct MetricValue {
  std::optional<double> value;
  std::string error;
};

struct EvalReport {
  std::string detector;
  MerkMode merk = MerkMode::Exclude;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t excluded = 0;
  MetricValue optimal_f1;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  MetricValue system_wise_f1;
  std::vector<SystemF1Row> systems;
  MetricValue auc_pr;
  MetricValue auc_roc;

  std::string to_json() const;
  std::string to_table() const;
};

EvalReport evaluate(const AnomalyScoreSeries& series, const EvalOptions& opts = {}, std::string detector = {});

struct SeedAggregate {
  std::string detector;
  int runs = 0;
  double mean[4] = {0, 0, 0, 0};  // optimal F1, system-wise F1, AUC-PR, AUC-ROC
  double std[4] = {0, 0, 0, 0};
};

/// Mean and population standard deviation per detector over its reports;
/// undefined metrics are left out of that metric's statistics.
std::vector<SeedAggregate> aggregate_reports(const std::vector<EvalReport>& reports);
std::string comparison_table(const std::vector<SeedAggregate>& rows);

}  // namespace stsad
