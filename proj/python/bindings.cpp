#include "stsad/detect.hpp"
#include "stsad/synthgen.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace stsad;

namespace {

py::dict series_dict(const AnomalyScoreSeries& s) {
  std::vector<std::string> ids, dates, labels;
  std::vector<int> index;
  std::vector<double> scores;
  for (const auto& e : s.entries) {
    ids.push_back(e.system_id);
    dates.push_back(format_date(e.date));
    index.push_back(e.day_index);
    scores.push_back(e.score);
    labels.emplace_back(to_string(e.label));
  }
  py::dict d;
  d["system_id"] = ids;
  d["date"] = dates;
  d["day_index"] = index;
  d["score"] = py::array_t<double>(static_cast<py::ssize_t>(scores.size()), scores.data());
  d["label"] = labels;
  return d;
}

py::object parse_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Solar thermal anomaly detection: VAE and PCA detectors, metrics, synthetic data";

  auto base = py::register_exception<Error>(m, "StsadError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<MetricError>(m, "MetricError", base.ptr());

  // ------------------------------------------------------------------ data
  py::class_<Schema>(m, "Schema")
      .def_static("solar_thermal", &Schema::solar_thermal)
      .def_static("load", &Schema::load)
      .def_property_readonly("channels", &Schema::channel_names);

  py::class_<DatasetSplit>(m, "DatasetSplit")
      .def_static("load", &DatasetSplit::load)
      .def_static("reference", &DatasetSplit::reference)
      .def_readwrite("train", &DatasetSplit::train)
      .def_readwrite("validation", &DatasetSplit::validation)
      .def_readwrite("test", &DatasetSplit::test);

  py::class_<DayTrace>(m, "DayTrace")
      .def_readonly("system_id", &DayTrace::system_id)
      .def_property_readonly("date", &DayTrace::date_string)
      .def_readonly("values", &DayTrace::values)
      .def_property_readonly("label", [](const DayTrace& d) { return std::string(to_string(d.label)); })
      .def("__repr__", [](const DayTrace& d) {
        return "<DayTrace " + d.system_id + " " + d.date_string() + " " + std::string(to_string(d.label)) + ">";
      });

  m.def(
      "load_days", [](const std::filesystem::path& dir, const Schema& schema) { return load_dataset_dir(dir, schema).days; },
      py::arg("systems_dir"), py::arg("schema") = Schema::solar_thermal(),
      "Loads every system CSV in a directory and returns its complete days.");
  m.def(
      "split_days",
      [](const std::vector<DayTrace>& days, const DatasetSplit& split) {
        PartitionedDays p = split_dataset(days, split);
        py::dict d;
        d["train"] = std::move(p.train);
        d["validation"] = std::move(p.validation);
        d["test"] = std::move(p.test);
        return d;
      },
      py::arg("days"), py::arg("split"));

  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out, std::uint64_t seed, int systems, int days, double fault_prevalence,
         double merk_prevalence) {
        synth::SynthConfig cfg;
        cfg.seed = seed;
        cfg.num_systems = systems;
        cfg.days_per_system = days;
        cfg.fault_prevalence = fault_prevalence;
        cfg.merk_prevalence = merk_prevalence;
        const synth::SynthDataset ds = synth::generate_dataset(cfg);
        synth::write_dataset(ds, out);
        return ds.days.size();
      },
      py::arg("out_dir"), py::arg("seed") = 7, py::arg("systems") = 20, py::arg("days") = 20,
      py::arg("fault_prevalence") = 0.3, py::arg("merk_prevalence") = 0.0,
      "Writes systems/, schema.txt, split.txt and labels.csv; returns the number of days.");

  // ------------------------------------------------------------------ preprocessing
  py::class_<NormStats>(m, "NormStats")
      .def("to_text", &NormStats::to_text)
      .def_static("from_text", &NormStats::from_text);
  m.def(
      "fit_normalizer",
      [](const std::vector<DayTrace>& days, const Schema& schema) { return fit_normalizer(days, schema); },
      py::arg("days"), py::arg("schema") = Schema::solar_thermal());
  m.def("apply_normalizer", &apply_normalizer, py::arg("values"), py::arg("stats"));
  m.def(
      "tokenize", [](const DayMatrix& day, int token_length) { return tokenize(day, {token_length, 64}); },
      py::arg("day"), py::arg("token_length") = 30);
  m.def(
      "detokenize",
      [](const TokenMatrix& tokens, int token_length, int features) {
        return detokenize(tokens, {token_length, 64}, features);
      },
      py::arg("tokens"), py::arg("token_length"), py::arg("features"));

  // ------------------------------------------------------------------ losses
  m.def(
      "gaussian_nll", [](const DayMatrix& x, const DayMatrix& mu, const DayMatrix& var) { return gaussian_nll(x, {mu, var}); },
      py::arg("x"), py::arg("mu"), py::arg("var"));
  m.def(
      "bnll_loss",
      [](const DayMatrix& x, const DayMatrix& mu, const DayMatrix& var, double beta_l) {
        return bnll_loss(x, {mu, var}, beta_l);
      },
      py::arg("x"), py::arg("mu"), py::arg("var"), py::arg("beta_l") = 0.5);
  m.def(
      "kl_divergence",
      [](const Eigen::MatrixXd& mu, const Eigen::MatrixXd& var) { return kl_divergence({mu, var, {}}); },
      py::arg("mu"), py::arg("var"));

  // ------------------------------------------------------------------ VAE
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_static("desk_profile", &TrainConfig::desk_profile)
      .def_static("paper_profile", &TrainConfig::paper_profile)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("beta_l", &TrainConfig::beta_l)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("num_layers", &TrainConfig::num_layers)
      .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
      .def_readwrite("latent_dim", &TrainConfig::latent_dim)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("token_length", &TrainConfig::token_length)
      .def_readwrite("update_steps", &TrainConfig::update_steps)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("log_every", &TrainConfig::log_every)
      .def_property(
          "homoscedastic", [](const TrainConfig& c) { return c.output == OutputKind::Homoscedastic; },
          [](TrainConfig& c, bool h) { c.output = h ? OutputKind::Homoscedastic : OutputKind::Heteroscedastic; })
      .def("to_text", &TrainConfig::to_text);

  py::class_<ModelCheckpoint>(m, "ModelCheckpoint")
      .def_readonly("config", &ModelCheckpoint::config)
      .def("save", &ModelCheckpoint::save)
      .def_static("load", &ModelCheckpoint::load)
      .def(
          "reconstruct",
          [](const ModelCheckpoint& c, const DayTrace& day) {
            const GaussianField g = reconstruct(day, c);
            return py::make_tuple(g.mu, g.var);
          },
          "Posterior-mean reconstruction of a raw day in normalized units: (mu, var).");

  m.def(
      "train",
      [](const std::vector<DayTrace>& train_days, const std::vector<DayTrace>& validation_days, const NormStats& norm,
         const TrainConfig& cfg) {
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(train_days, validation_days, norm, cfg);
        }
        py::list log;
        for (const auto& row : r.log) {
          py::dict d;
          d["step"] = row.step;
          d["train_total"] = row.train_total;
          d["train_recon"] = row.train_recon;
          d["train_kl"] = row.train_kl;
          d["val_total"] = row.val_total;
          d["val_nll"] = row.val_nll;
          log.append(d);
        }
        return py::make_tuple(std::move(r.checkpoint), log);
      },
      py::arg("train_days"), py::arg("validation_days"), py::arg("norm"), py::arg("config"),
      "Returns (checkpoint, log rows).");

  m.def(
      "score_vae",
      [](const std::vector<DayTrace>& days, const ModelCheckpoint& ckpt, const std::string& detector) {
        return series_dict(score_vae(days, ckpt, parse_detector(detector)));
      },
      py::arg("days"), py::arg("checkpoint"), py::arg("detector") = "vae");

  // ------------------------------------------------------------------ PCA
  py::class_<PcaModel>(m, "PcaModel")
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("components", &PcaModel::components)
      .def_readonly("explained", &PcaModel::explained)
      .def("reconstruct", [](const PcaModel& p, const Eigen::VectorXd& x) { return reconstruct_pca(x, p); });
  m.def(
      "fit_pca", [](const Eigen::MatrixXd& rows, int n) { return fit_pca(rows, n); }, py::arg("rows"),
      py::arg("n_components"));

  py::class_<PcaDetector>(m, "PcaDetector")
      .def_readonly("model", &PcaDetector::model)
      .def("save", &PcaDetector::save)
      .def_static("load", &PcaDetector::load);
  m.def(
      "fit_pca_detector",
      [](const std::vector<DayTrace>& days, const NormStats& norm, int n, const std::string& scaler) {
        PcaOptions o{n, ScalerKind::ZNorm};
        if (scaler == "iqr") o.scaler = ScalerKind::InterQuartile;
        else if (scaler != "znorm") throw ParameterError("unknown scaler '" + scaler + "'");
        return fit_pca_detector(days, norm, o);
      },
      py::arg("days"), py::arg("norm"), py::arg("n_components") = 3, py::arg("scaler") = "znorm");
  m.def(
      "score_pca",
      [](const std::vector<DayTrace>& days, const PcaDetector& det, const std::string& detector) {
        return series_dict(score_pca(days, det, parse_detector(detector)));
      },
      py::arg("days"), py::arg("detector"), py::arg("kind") = "pca-rescaled");

  // ------------------------------------------------------------------ metrics
  m.def(
      "optimal_f1",
      [](const std::vector<double>& s, const std::vector<int>& y) {
        const F1Result r = optimal_f1(s, y);
        return py::make_tuple(r.f1, r.threshold);
      },
      py::arg("scores"), py::arg("labels"), "Returns (f1, threshold); a day is flagged when score > threshold.");
  m.def("auc_roc", &auc_roc, py::arg("scores"), py::arg("labels"));
  m.def("auc_pr", &auc_pr, py::arg("scores"), py::arg("labels"));
  m.def(
      "system_wise_f1",
      [](const std::vector<double>& s, const std::vector<int>& y, const std::vector<std::string>& systems) {
        return system_wise_f1(s, y, systems).mean_f1;
      },
      py::arg("scores"), py::arg("labels"), py::arg("systems"));
  m.def(
      "kfold_f1",
      [](const std::vector<double>& s, const std::vector<int>& y, int k, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const KFoldResult r = kfold_f1(s, y, k, rng);
        return py::make_tuple(r.mean_f1, r.mean_threshold);
      },
      py::arg("scores"), py::arg("labels"), py::arg("k"), py::arg("seed") = 0);
  m.def(
      "evaluate_csv",
      [](const std::filesystem::path& scores, const std::string& merk) {
        EvalOptions o;
        o.merk = parse_merk_mode(merk);
        return parse_json(evaluate(load_scores(scores), o, scores.stem().string()).to_json());
      },
      py::arg("scores_csv"), py::arg("merk") = "exclude", "EvalReport of a score CSV as a dict.");
}
