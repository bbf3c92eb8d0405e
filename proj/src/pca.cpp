#include "stsad/pca.hpp"

#include "stsad/checkpoint.hpp"
#include "stsad/error.hpp"
#include "stsad/scoring.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <fstream>
#include <ostream>

namespace stsad {

namespace {

PcaModel from_scatter(const Eigen::VectorXd& mean, const Eigen::MatrixXd& scatter, double count, int n_components) {
  const auto F = static_cast<int>(mean.size());
  if (n_components < 1 || n_components > F) {
    throw ParameterError("n_components must lie in [1, " + std::to_string(F) + "], got " +
                         std::to_string(n_components));
  }
  if (!(count > F)) throw ParameterError("PCA needs more rows than features");
  const Eigen::MatrixXd cov = scatter / (count - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw ParameterError("covariance eigendecomposition failed");
  // Eigenvalues come out ascending.
  const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  const double total = values.sum();

  PcaModel model;
  model.mean = mean;
  model.components.resize(n_components, F);
  model.explained.resize(n_components);
  for (int i = 0; i < n_components; ++i) {
    const int src = F - 1 - i;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    model.components.row(i) = v.transpose();
    model.explained(i) = total > 0.0 ? values(src) / total : 0.0;
  }
  return model;
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& rows, int n_components) {
  if (rows.rows() == 0) throw ParameterError("PCA needs training rows");
  const Eigen::VectorXd mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  return from_scatter(mean, centered.transpose() * centered, static_cast<double>(rows.rows()), n_components);
}

PcaModel fit_pca(const std::vector<DayMatrix>& days, int n_components) {
  if (days.empty()) throw ParameterError("PCA needs training days");
  const Eigen::Index F = days.front().cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(F);
  double count = 0.0;
  for (const auto& d : days) {
    if (d.cols() != F) throw ShapeError("training days differ in width");
    sum += d.colwise().sum().transpose();
    count += static_cast<double>(d.rows());
  }
  const Eigen::VectorXd mean = sum / count;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(F, F);
  for (const auto& d : days) {
    const Eigen::MatrixXd centered = d.rowwise() - mean.transpose();
    scatter.noalias() += centered.transpose() * centered;
  }
  return from_scatter(mean, scatter, count, n_components);
}

PcaModel truncate(const PcaModel& model, int n_components) {
  if (n_components < 1 || n_components > model.num_components()) {
    throw ParameterError("cannot keep " + std::to_string(n_components) + " of " +
                         std::to_string(model.num_components()) + " components");
  }
  PcaModel out;
  out.mean = model.mean;
  out.components = model.components.topRows(n_components);
  out.explained = model.explained.head(n_components);
  return out;
}

Eigen::VectorXd reconstruct_pca(const Eigen::VectorXd& x, const PcaModel& model) {
  if (x.size() != model.mean.size()) throw ShapeError("reconstruct_pca: vector length differs from the model");
  return model.mean + model.components.transpose() * (model.components * (x - model.mean));
}

DayMatrix reconstruct_pca(const DayMatrix& day, const PcaModel& model) {
  if (day.cols() != model.mean.size()) throw ShapeError("reconstruct_pca: day width differs from the model");
  const Eigen::MatrixXd centered = day.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd projected = centered * model.components.transpose() * model.components;
  DayMatrix out = projected.rowwise() + model.mean.transpose();
  return out;
}

NormStats without_smoothing(NormStats norm) {
  for (auto& n : norm.norms) n.smooth = false;
  return norm;
}

namespace {

std::vector<DayMatrix> normalize_all(const std::vector<DayTrace>& days, const NormStats& norm) {
  std::vector<DayMatrix> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(apply_normalizer(d.values, norm));
  return out;
}

ErrorScaler training_scaler(const std::vector<DayMatrix>& normalized, const PcaModel& model, ScalerKind kind) {
  std::vector<DayMatrix> errors;
  errors.reserve(normalized.size());
  for (const auto& x : normalized) errors.push_back(error_vector(x, reconstruct_pca(x, model)));
  return fit_error_scaler(errors, kind);
}

TensorBlock block_of(const std::string& name, const Eigen::MatrixXd& m) {
  TensorBlock b;
  b.name = name;
  b.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  const Eigen::MatrixXf f = m.cast<float>();
  b.data.assign(f.data(), f.data() + f.size());
  return b;
}

Eigen::MatrixXd matrix_of(const TensorBlock& b) {
  if (b.shape.size() != 2) throw CheckpointError("block '" + b.name + "' is not two-dimensional");
  const auto rows = static_cast<Eigen::Index>(b.shape[0]);
  const auto cols = static_cast<Eigen::Index>(b.shape[1]);
  if (static_cast<std::size_t>(rows * cols) != b.data.size()) throw CheckpointError("block '" + b.name + "' is truncated");
  return Eigen::Map<const Eigen::MatrixXf>(b.data.data(), rows, cols).cast<double>();
}

}  // namespace

void PcaDetector::write(std::ostream& out) const {
  Container c;
  c.magic = kPcaMagic;
  c.version = kFormatVersion;
  c.texts = {norm.to_text(), scaler.kind == ScalerKind::ZNorm ? "znorm" : "iqr"};
  c.blocks.push_back(block_of("mean", model.mean));
  c.blocks.push_back(block_of("components", model.components));
  c.blocks.push_back(block_of("explained", model.explained));
  c.blocks.push_back(block_of("error_scaler.location", Eigen::MatrixXd(scaler.location)));
  c.blocks.push_back(block_of("error_scaler.scale", Eigen::MatrixXd(scaler.scale)));
  write_container(out, c);
}

void PcaDetector::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  write(out);
}

PcaDetector PcaDetector::read(std::istream& in) {
  const Container c = read_container(in);
  if (c.magic != kPcaMagic) throw CheckpointError("not a PCA checkpoint");
  if (c.version != kFormatVersion) throw CheckpointError("unsupported PCA checkpoint version " + std::to_string(c.version));
  if (c.texts.size() != 2) throw CheckpointError("PCA checkpoint header is incomplete");
  PcaDetector d;
  d.norm = NormStats::from_text(c.texts[0]);
  d.scaler.kind = c.texts[1] == "znorm" ? ScalerKind::ZNorm : ScalerKind::InterQuartile;
  d.model.mean = matrix_of(c.block("mean"));
  d.model.components = matrix_of(c.block("components"));
  d.model.explained = matrix_of(c.block("explained"));
  d.scaler.location = matrix_of(c.block("error_scaler.location"));
  d.scaler.scale = matrix_of(c.block("error_scaler.scale"));
  const auto F = static_cast<Eigen::Index>(d.norm.num_channels());
  if (d.model.mean.size() != F || d.model.components.cols() != F || d.scaler.location.cols() != F ||
      d.scaler.scale.rows() != d.scaler.location.rows()) {
    throw CheckpointError("PCA checkpoint blocks are inconsistent");
  }
  return d;
}

PcaDetector PcaDetector::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read(in);
}

PcaDetector fit_pca_detector(const std::vector<DayTrace>& training_days, const NormStats& norm,
                             const PcaOptions& opts) {
  const std::vector<DayMatrix> normalized = normalize_all(training_days, norm);
  PcaDetector d;
  d.norm = norm;
  d.model = fit_pca(normalized, opts.n_components);
  d.scaler = training_scaler(normalized, d.model, opts.scaler);
  return d;
}

double pca_day_score(const DayTrace& day, const PcaDetector& detector, bool rescaled) {
  const DayMatrix x = apply_normalizer(day.values, detector.norm);
  const DayMatrix e = error_vector(x, reconstruct_pca(x, detector.model));
  return rescaled ? apply_scaler(e, detector.scaler).mean() : e.mean();
}

std::vector<SweepRow> pca_sweep(const std::vector<DayTrace>& training_days, const std::vector<DayTrace>& test_days,
                                const NormStats& norm, int n_min, int n_max, ScalerKind scaler) {
  const int F = static_cast<int>(norm.num_channels());
  if (n_min < 1 || n_max > F || n_min > n_max) {
    throw ParameterError("component range must lie within [1, " + std::to_string(F) + "]");
  }
  const std::vector<DayMatrix> train = normalize_all(training_days, norm);
  const std::vector<DayMatrix> test = normalize_all(test_days, norm);
  const PcaModel full = fit_pca(train, F);

  std::vector<SweepRow> rows;
  for (int n = n_min; n <= n_max; ++n) {
    const auto start = std::chrono::steady_clock::now();
    const PcaModel model = truncate(full, n);
    const ErrorScaler sc = training_scaler(train, model, scaler);
    AnomalyScoreSeries unscaled, rescaled;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const DayMatrix e = error_vector(test[i], reconstruct_pca(test[i], model));
      ScoreEntry entry{test_days[i].system_id, test_days[i].date, static_cast<int>(i), e.mean(), test_days[i].label};
      unscaled.entries.push_back(entry);
      entry.score = apply_scaler(e, sc).mean();
      rescaled.entries.push_back(entry);
    }
    const BinaryScores u = binarize(unscaled);
    const BinaryScores r = binarize(rescaled);
    SweepRow row;
    row.n_components = n;
    row.cum_explained_var = model.cumulative_explained();
    row.optf1_unscaled = optimal_f1(u.scores, u.labels).f1;
    row.optf1_rescaled = optimal_f1(r.scores, r.labels).f1;
    row.syswise_f1 = system_wise_f1(r.scores, r.labels, r.systems).mean_f1;
    row.auc_pr = auc_pr(r.scores, r.labels);
    row.auc_roc = auc_roc(r.scores, r.labels);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "n_components,cum_explained_var,optf1_unscaled,optf1_rescaled,syswise_f1,auc_pr,auc_roc,wall_seconds\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.n_components << ',' << r.cum_explained_var << ',' << r.optf1_unscaled << ',' << r.optf1_rescaled << ','
        << r.syswise_f1 << ',' << r.auc_pr << ',' << r.auc_roc << ',' << r.wall_seconds << '\n';
  }
}

}  // namespace stsad
