#pragma once

#include "stsad/dataset_io.hpp"
#include "stsad/pca.hpp"
#include "stsad/scoring.hpp"
#include "stsad/vae.hpp"

#include <string_view>
#include <vector>

namespace stsad {

enum class DetectorKind { Vae, VaeHomoscedastic, PcaUnscaled, PcaRescaled };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector(std::string_view text);
bool is_pca(DetectorKind kind);

/// Pairs days with their scores; day_index counts each system's days in
/// input order, starting at 0.
AnomalyScoreSeries make_series(const std::vector<DayTrace>& days, const std::vector<double>& scores);

struct VaeScoreOptions {
  ReconstructOptions reconstruct{};
  DayPooling pooling = DayPooling::Mean;
};

/// Heteroscedastic checkpoints score by mean NLL; homoscedastic ones by the
/// mean rescaled absolute error against their stored scaler. `kind` must
/// agree with the checkpoint.
AnomalyScoreSeries score_vae(const std::vector<DayTrace>& days, const ModelCheckpoint& ckpt, DetectorKind kind,
                             const VaeScoreOptions& opts = {});

AnomalyScoreSeries score_pca(const std::vector<DayTrace>& days, const PcaDetector& detector, DetectorKind kind);

}  // namespace stsad
