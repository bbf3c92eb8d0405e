#pragma once

#include "stsad/dataset_io.hpp"
#include "stsad/error_scaler.hpp"
#include "stsad/preprocess.hpp"
#include "stsad/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace stsad {

/// Principal components of per-minute feature vectors. Rows of
/// `components` are orthonormal, ordered by decreasing eigenvalue, and
/// oriented so their largest-magnitude coordinate is positive.
struct PcaModel {
  Eigen::VectorXd mean;        // F
  Eigen::MatrixXd components;  // n x F
  Eigen::VectorXd explained;   // n, fractions of total variance

  int num_components() const { return static_cast<int>(components.rows()); }
  int num_features() const { return static_cast<int>(components.cols()); }
  double cumulative_explained() const { return explained.sum(); }
};

/// `rows` is N x F with N > F.
PcaModel fit_pca(const Eigen::MatrixXd& rows, int n_components);

/// Pools every minute of every (already normalized) day.
PcaModel fit_pca(const std::vector<DayMatrix>& days, int n_components);

/// Keeps the leading n components.
PcaModel truncate(const PcaModel& model, int n_components);

/// mean + C^T C (x - mean).
Eigen::VectorXd reconstruct_pca(const Eigen::VectorXd& x, const PcaModel& model);
DayMatrix reconstruct_pca(const DayMatrix& day, const PcaModel& model);

/// A fitted PCA-R detector: normalizer, components and the training-error
/// scaler. The unscaled variant ignores the scaler.
struct PcaDetector {
  NormStats norm;
  PcaModel model;
  ErrorScaler scaler;

  static constexpr std::uint32_t kFormatVersion = 1;

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static PcaDetector read(std::istream& in);
  static PcaDetector load(const std::filesystem::path& path);
};

struct PcaOptions {
  int n_components = 3;
  ScalerKind scaler = ScalerKind::ZNorm;
};

PcaDetector fit_pca_detector(const std::vector<DayTrace>& training_days, const NormStats& norm,
                             const PcaOptions& opts);

/// Mean absolute (rescaled = false) or mean z-rescaled reconstruction error.
double pca_day_score(const DayTrace& day, const PcaDetector& detector, bool rescaled);

/// Copy of `norm` with smoothing switched off on every channel.
NormStats without_smoothing(NormStats norm);

/// One row of the component-count sweep. The last four metrics belong to
/// the rescaled variant.
struct SweepRow {
  int n_components = 0;
  double cum_explained_var = 0.0;
  double optf1_unscaled = 0.0;
  double optf1_rescaled = 0.0;
  double syswise_f1 = 0.0;
  double auc_pr = 0.0;
  double auc_roc = 0.0;
  double wall_seconds = 0.0;
};

/// Fits once, then scores every test day for each n in [n_min, n_max].
/// Merk test days are left out of the metrics.
std::vector<SweepRow> pca_sweep(const std::vector<DayTrace>& training_days, const std::vector<DayTrace>& test_days,
                                const NormStats& norm, int n_min, int n_max, ScalerKind scaler = ScalerKind::ZNorm);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace stsad
