#include "stsad/detect.hpp"

#include "stsad/error.hpp"

#include <map>

namespace stsad {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Vae:
      return "vae";
    case DetectorKind::VaeHomoscedastic:
      return "vae-homoscedastic";
    case DetectorKind::PcaUnscaled:
      return "pca-unscaled";
    case DetectorKind::PcaRescaled:
      return "pca-rescaled";
  }
  return "vae";
}

DetectorKind parse_detector(std::string_view text) {
  for (auto k : {DetectorKind::Vae, DetectorKind::VaeHomoscedastic, DetectorKind::PcaUnscaled,
                 DetectorKind::PcaRescaled}) {
    if (text == to_string(k)) return k;
  }
  throw ParameterError("unknown detector '" + std::string(text) +
                       "' (vae|vae-homoscedastic|pca-unscaled|pca-rescaled)");
}

bool is_pca(DetectorKind kind) { return kind == DetectorKind::PcaUnscaled || kind == DetectorKind::PcaRescaled; }

AnomalyScoreSeries make_series(const std::vector<DayTrace>& days, const std::vector<double>& scores) {
  if (days.size() != scores.size()) throw ShapeError("days and scores differ in length");
  AnomalyScoreSeries series;
  std::map<std::string, int> next_index;
  for (std::size_t i = 0; i < days.size(); ++i) {
    series.entries.push_back({days[i].system_id, days[i].date, next_index[days[i].system_id]++, scores[i],
                              days[i].label});
  }
  series.validate();
  return series;
}

AnomalyScoreSeries score_vae(const std::vector<DayTrace>& days, const ModelCheckpoint& ckpt, DetectorKind kind,
                             const VaeScoreOptions& opts) {
  if (kind == DetectorKind::Vae && ckpt.config.output != OutputKind::Heteroscedastic) {
    throw CheckpointError("detector 'vae' needs a heteroscedastic checkpoint");
  }
  if (kind == DetectorKind::VaeHomoscedastic &&
      (ckpt.config.output != OutputKind::Homoscedastic || !ckpt.error_scaler)) {
    throw CheckpointError("detector 'vae-homoscedastic' needs a homoscedastic checkpoint with an error scaler");
  }
  if (is_pca(kind)) throw CheckpointError("a VAE checkpoint cannot serve a PCA detector");

  std::vector<double> scores;
  scores.reserve(days.size());
  for (const auto& d : days) {
    const DayMatrix x = apply_normalizer(d.values, ckpt.norm);
    const GaussianField recon = reconstruct_normalized(x, ckpt, opts.reconstruct);
    if (kind == DetectorKind::Vae) {
      scores.push_back(nll_day_score(x, recon, opts.pooling));
    } else {
      scores.push_back(error_day_score(apply_scaler(error_vector(x, recon.mu), *ckpt.error_scaler), opts.pooling));
    }
  }
  return make_series(days, scores);
}

AnomalyScoreSeries score_pca(const std::vector<DayTrace>& days, const PcaDetector& detector, DetectorKind kind) {
  if (!is_pca(kind)) throw CheckpointError("a PCA checkpoint cannot serve a VAE detector");
  std::vector<double> scores;
  scores.reserve(days.size());
  for (const auto& d : days) scores.push_back(pca_day_score(d, detector, kind == DetectorKind::PcaRescaled));
  return make_series(days, scores);
}

}  // namespace stsad
