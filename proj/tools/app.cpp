#include "app.hpp"

#include "stsad/detect.hpp"
#include "stsad/synthgen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <regex>
#include <sstream>

namespace stsad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolName = "stsad";
constexpr const char* kToolVersion = "0.1.0";

/// Bad invocation or missing inputs; the message carries the remedy.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string out = ".";
  std::string data;

  // ingest
  std::string raw;
  std::string schema_file;
  std::string split_file;

  // synth
  synth::SynthConfig synth;

  // train
  std::string profile = "desk";
  std::vector<std::uint64_t> seeds{1};
  long steps = 0;
  double learning_rate = 0.0;
  std::string train_detector = "vae";
  int components = 3;
  std::string scaler = "znorm";

  // score
  std::string checkpoint;
  std::string detector = "vae";
  std::string score_split = "test";
  std::string name;

  // sweep-pca
  int n_min = 1;
  int n_max = 0;

  // eval
  std::vector<std::string> score_files;
  std::string merk = "exclude";
  bool clean_counts_as_one = false;

  // report
  std::string scores;
  std::vector<std::string> systems;
  double cap = 3.0;
};

std::string hex(const unsigned char* data, unsigned len) {
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return os.str();
}

ScalerKind parse_scaler(const std::string& s) {
  if (s == "znorm") return ScalerKind::ZNorm;
  if (s == "iqr") return ScalerKind::InterQuartile;
  throw ParameterError("unknown scaler '" + s + "' (znorm | iqr)");
}

// ---------------------------------------------------------------- data dirs

struct DataDir {
  Schema schema;
  DatasetSplit split;
  std::vector<DayTrace> days;
  std::vector<fs::path> files;
};

fs::path systems_dir(const fs::path& root) { return fs::exists(root / "systems") ? root / "systems" : root; }

DataDir load_data(const std::string& dir) {
  if (dir.empty()) {
    throw UsageError("no data directory: pass --data or set STSAD_DATA_DIR (create one with `stsad synth --out DIR`)");
  }
  const fs::path root(dir);
  if (!fs::is_directory(root)) {
    throw UsageError("data directory '" + dir + "' does not exist; create it with `stsad synth --out " + dir +
                     "` or `stsad ingest --raw RAW --out " + dir + "`");
  }
  DataDir d;
  d.schema = fs::exists(root / "schema.txt") ? Schema::load(root / "schema.txt") : Schema::solar_thermal();
  d.split = fs::exists(root / "split.txt") ? DatasetSplit::load(root / "split.txt") : DatasetSplit::reference();
  for (const auto& f : {root / "schema.txt", root / "split.txt"}) {
    if (fs::exists(f)) d.files.push_back(f);
  }
  for (const auto& e : fs::directory_iterator(systems_dir(root))) {
    if (e.path().extension() == ".csv") d.files.push_back(e.path());
  }
  if (std::none_of(d.files.begin(), d.files.end(), [](const fs::path& p) { return p.extension() == ".csv"; })) {
    throw UsageError("no system CSV files in '" + dir + "'; create a dataset with `stsad synth --out " + dir + "`");
  }
  d.days = load_dataset_dir(systems_dir(root), d.schema).days;
  std::sort(d.files.begin(), d.files.end());
  return d;
}

// ---------------------------------------------------------------- manifest

struct Manifest {
  std::string command;
  std::string config;
  std::vector<fs::path> inputs;
  json outputs = json::array();
  json extra = json::object();

  void write(const fs::path& dir) const {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config"] = config;
    json digests = json::object();
    for (const auto& p : inputs) digests[p.generic_string()] = sha256_file(p.string());
    j["inputs"] = digests;
    j["outputs"] = outputs;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream(dir / "manifest.json") << j.dump(2) << "\n";
    std::ofstream(dir / "config.ini") << config;
  }
};

fs::path prepare_out(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------- commands

void cmd_ingest(const Options& o, Manifest& m, std::ostream& log) {
  if (o.raw.empty() || !fs::is_directory(o.raw)) throw UsageError("--raw must name a directory of system CSV files");
  const Schema schema = o.schema_file.empty() ? Schema::solar_thermal() : Schema::load(o.schema_file);
  const DatasetSplit split = o.split_file.empty() ? DatasetSplit::reference() : DatasetSplit::load(o.split_file);
  const LoadedDataset loaded = load_dataset_dir(o.raw, schema);
  for (const auto& e : fs::directory_iterator(o.raw)) {
    if (e.path().extension() == ".csv") m.inputs.push_back(e.path());
  }
  if (!o.schema_file.empty()) m.inputs.emplace_back(o.schema_file);
  if (!o.split_file.empty()) m.inputs.emplace_back(o.split_file);
  std::sort(m.inputs.begin(), m.inputs.end());

  const fs::path out = prepare_out(o.out);
  fs::create_directories(out / "systems");
  std::size_t begin = 0;
  while (begin < loaded.days.size()) {
    std::size_t end = begin;
    std::vector<const DayTrace*> group;
    while (end < loaded.days.size() && loaded.days[end].system_id == loaded.days[begin].system_id) {
      group.push_back(&loaded.days[end++]);
    }
    std::ofstream f(out / "systems" / (loaded.days[begin].system_id + ".csv"));
    synth::write_system_csv(f, group, schema);
    m.outputs.push_back("systems/" + loaded.days[begin].system_id + ".csv");
    begin = end;
  }
  std::ofstream(out / "schema.txt") << [&] { std::ostringstream s; schema.write(s); return s.str(); }();
  std::ofstream(out / "split.txt") << [&] { std::ostringstream s; split.write(s); return s.str(); }();
  std::ofstream report(out / "ingest_report.csv");
  write_ingest_report(report, loaded.summaries);
  for (const char* f : {"schema.txt", "split.txt", "ingest_report.csv"}) m.outputs.push_back(f);
  log << "ingested " << loaded.days.size() << " complete days from " << loaded.summaries.size() << " systems\n";
}

void cmd_synth(const Options& o, Manifest& m, std::ostream& log) {
  const synth::SynthDataset ds = synth::generate_dataset(o.synth);
  const fs::path out = prepare_out(o.out);
  synth::write_dataset(ds, out);
  for (const auto& id : ds.split.train) m.outputs.push_back("systems/" + id + ".csv");
  for (const auto& id : ds.split.validation) m.outputs.push_back("systems/" + id + ".csv");
  for (const auto& id : ds.split.test) m.outputs.push_back("systems/" + id + ".csv");
  for (const char* f : {"schema.txt", "split.txt", "labels.csv"}) m.outputs.push_back(f);
  log << "wrote " << ds.days.size() << " days for " << o.synth.num_systems << " systems to " << out.string() << "\n";
}

TrainConfig resolve_train_config(const Options& o, std::uint64_t seed) {
  TrainConfig cfg;
  if (o.profile == "desk") {
    cfg = TrainConfig::desk_profile();
  } else if (o.profile == "paper") {
    cfg = TrainConfig::paper_profile();
  } else {
    throw ParameterError("unknown profile '" + o.profile + "' (desk | paper)");
  }
  if (o.steps > 0) cfg.update_steps = o.steps;
  if (o.learning_rate > 0.0) cfg.learning_rate = o.learning_rate;
  cfg.seed = seed;
  cfg.output = o.train_detector == "vae-homoscedastic" ? OutputKind::Homoscedastic : OutputKind::Heteroscedastic;
  cfg.validate();
  return cfg;
}

void cmd_train(const Options& o, Manifest& m, std::ostream& log) {
  if (o.train_detector != "vae" && o.train_detector != "vae-homoscedastic" && o.train_detector != "pca") {
    throw ParameterError("unknown detector '" + o.train_detector + "' (vae | vae-homoscedastic | pca)");
  }
  const DataDir data = load_data(o.data);
  m.inputs = data.files;
  const PartitionedDays part = split_dataset(data.days, data.split);
  if (part.train.empty()) throw UsageError("the split names no training days present in '" + o.data + "'");
  const NormStats norm = fit_normalizer(part.train, data.schema);
  const fs::path out = prepare_out(o.out);

  if (o.train_detector == "pca") {
    const PcaDetector det = fit_pca_detector(part.train, norm, {o.components, parse_scaler(o.scaler)});
    det.save(out / "pca.ckpt");
    m.outputs.push_back("pca.ckpt");
    m.extra["cumulative_explained_variance"] = det.model.cumulative_explained();
    log << "fitted " << o.components << " principal components (cumulative explained variance "
        << det.model.cumulative_explained() << ")\n";
    return;
  }

  json summary = json::array();
  for (const auto seed : o.seeds) {
    const TrainConfig cfg = resolve_train_config(o, seed);
    const std::string stem = o.train_detector + "_seed" + std::to_string(seed);
    log << "training " << stem << " for " << cfg.update_steps << " steps\n";
    const TrainResult res = train(part.train, part.validation, norm, cfg, [&log](const TrainLogRow& r) {
      log << "  step " << r.step << " train " << r.train_total << " val " << r.val_total << "\n";
    });
    res.checkpoint.save(out / (stem + ".ckpt"));
    std::ofstream logf(out / (stem + "_log.csv"));
    write_train_log(logf, res.log);
    m.outputs.push_back(stem + ".ckpt");
    m.outputs.push_back(stem + "_log.csv");
    summary.push_back({{"seed", seed},
                       {"steps", cfg.update_steps},
                       {"val_total", res.log.back().val_total},
                       {"val_nll", res.log.back().val_nll}});
  }
  std::ofstream(out / "train_summary.json") << summary.dump(2) << "\n";
  m.outputs.push_back("train_summary.json");
  m.extra["validation"] = summary;
}

std::vector<DayTrace> score_days(const DataDir& data, const std::string& which) {
  if (which == "all") return data.days;
  const PartitionedDays part = split_dataset(data.days, data.split);
  if (which == "test") return part.test;
  if (which == "validation") return part.validation;
  if (which == "train") return part.train;
  throw ParameterError("unknown split '" + which + "' (train | validation | test | all)");
}

std::string score_name(const Options& o) {
  if (!o.name.empty()) return o.name;
  const std::string stem = fs::path(o.checkpoint).stem().string();
  const auto pos = stem.rfind("_seed");
  return o.detector + (pos == std::string::npos ? std::string() : stem.substr(pos));
}

void cmd_score(const Options& o, Manifest& m, std::ostream& log) {
  const DetectorKind kind = parse_detector(o.detector);
  if (o.checkpoint.empty() || !fs::exists(o.checkpoint)) {
    throw UsageError("--checkpoint must name an existing checkpoint (produce one with `stsad train`)");
  }
  const DataDir data = load_data(o.data);
  m.inputs = data.files;
  m.inputs.emplace_back(o.checkpoint);
  const std::vector<DayTrace> days = score_days(data, o.score_split);
  const AnomalyScoreSeries series = is_pca(kind) ? score_pca(days, PcaDetector::load(o.checkpoint), kind)
                                                 : score_vae(days, ModelCheckpoint::load(o.checkpoint), kind);
  const fs::path out = prepare_out(o.out);
  const std::string file = score_name(o) + ".csv";
  save_scores(out / file, series);
  m.outputs.push_back(file);
  log << "scored " << series.size() << " days with " << o.detector << " -> " << (out / file).string() << "\n";
}

void cmd_sweep(const Options& o, Manifest& m, std::ostream& log) {
  const DataDir data = load_data(o.data);
  m.inputs = data.files;
  const PartitionedDays part = split_dataset(data.days, data.split);
  const NormStats norm = fit_normalizer(part.train, data.schema);
  const int n_max = o.n_max > 0 ? o.n_max : static_cast<int>(data.schema.num_channels());
  const auto rows = pca_sweep(part.train, part.test, norm, o.n_min, n_max, parse_scaler(o.scaler));
  const fs::path out = prepare_out(o.out);
  std::ofstream f(out / "sweep.csv");
  write_sweep_csv(f, rows);
  m.outputs.push_back("sweep.csv");
  for (const auto& r : rows) {
    log << "n=" << r.n_components << " explained " << r.cum_explained_var << " optimal F1 " << r.optf1_rescaled
        << "\n";
  }
}

std::string detector_of(const fs::path& scores) {
  static const std::regex seed_suffix("_seed[0-9]+$");
  return std::regex_replace(scores.stem().string(), seed_suffix, "");
}

void cmd_eval(const Options& o, Manifest& m, std::ostream& log) {
  if (o.score_files.empty()) throw UsageError("--scores needs at least one score CSV (produce one with `stsad score`)");
  EvalOptions opts;
  opts.merk = parse_merk_mode(o.merk);
  if (o.clean_counts_as_one) opts.eligibility = SystemEligibility::CleanCountsAsOne;
  const fs::path out = prepare_out(o.out);
  std::vector<EvalReport> reports;
  for (const auto& file : o.score_files) {
    m.inputs.emplace_back(file);
    const EvalReport r = evaluate(load_scores(file), opts, detector_of(file));
    const std::string stem = fs::path(file).stem().string();
    std::ofstream(out / ("eval_" + stem + ".json")) << r.to_json() << "\n";
    std::ofstream(out / ("eval_" + stem + ".txt")) << r.to_table();
    m.outputs.push_back("eval_" + stem + ".json");
    m.outputs.push_back("eval_" + stem + ".txt");
    for (const MetricValue* v : {&r.optimal_f1, &r.system_wise_f1, &r.auc_pr, &r.auc_roc}) {
      if (!v->value) log << "warning: " << stem << ": " << v->error << "\n";
    }
    reports.push_back(r);
  }
  const std::string table = comparison_table(aggregate_reports(reports));
  std::ofstream(out / "comparison.txt") << table;
  m.outputs.push_back("comparison.txt");
  log << table;
}

std::string_view label_color(DayLabel label) {
  switch (label) {
    case DayLabel::Normal:
      return "#2ca02c";
    case DayLabel::Merk:
      return "#ff7f0e";
    case DayLabel::Fault:
      return "#d62728";
  }
  return "#2ca02c";
}

void write_system_plot(const fs::path& dir, const std::string& id, const std::vector<ScoreEntry>& entries, double cap) {
  const double width = 800, height = 300, margin = 40;
  double lo = 0.0;
  for (const auto& e : entries) lo = std::min(lo, e.score);
  const double hi = cap;
  const double span = hi > lo ? hi - lo : 1.0;
  const double n = static_cast<double>(std::max<std::size_t>(entries.size(), 2) - 1);

  std::ofstream csv(dir / (id + ".csv"));
  csv << "day_index,capped_score,label\n";
  std::ofstream svg(dir / (id + ".svg"));
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
      << "<title>" << id << "</title>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">day index</text>\n"
      << "<text x=\"12\" y=\"" << height / 2 << "\" transform=\"rotate(-90 12 " << height / 2
      << ")\" text-anchor=\"middle\">anomaly score (capped at " << cap << ")</text>\n";
  csv << std::setprecision(17);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ScoreEntry& e = entries[i];
    const double s = std::min(e.score, cap);
    const double x = margin + (width - 2 * margin) * static_cast<double>(i) / n;
    const double y = height - margin - (height - 2 * margin) * (s - lo) / span;
    csv << e.day_index << ',' << s << ',' << to_string(e.label) << '\n';
    svg << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << label_color(e.label)
        << "\" data-day=\"" << e.day_index << "\" data-score=\"" << std::setprecision(17) << s << std::setprecision(6)
        << "\"/>\n";
  }
  svg << "</svg>\n";
}

void cmd_report(const Options& o, Manifest& m, std::ostream& log) {
  if (!(o.cap > 0.0)) throw ParameterError("--cap must be positive");
  if (o.scores.empty()) throw UsageError("--scores must name a score CSV (produce one with `stsad score`)");
  m.inputs.emplace_back(o.scores);
  const AnomalyScoreSeries series = load_scores(o.scores);
  std::vector<std::string> ids = o.systems;
  if (ids.empty()) {
    for (const auto& e : series.entries) {
      if (std::find(ids.begin(), ids.end(), e.system_id) == ids.end()) ids.push_back(e.system_id);
    }
  }
  const fs::path out = prepare_out(o.out);
  for (const auto& id : ids) {
    std::vector<ScoreEntry> entries;
    for (const auto& e : series.entries) {
      if (e.system_id == id) entries.push_back(e);
    }
    if (entries.empty()) throw LookupError("system '" + id + "' does not appear in " + o.scores);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.day_index < b.day_index; });
    write_system_plot(out, id, entries, o.cap);
    m.outputs.push_back(id + ".svg");
    m.outputs.push_back(id + ".csv");
  }
  log << "wrote " << ids.size() << " system plots to " << out.string() << "\n";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ParameterError*>(&e)) return kUsage;
  if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const OptimizerError*>(&e) ||
      dynamic_cast<const MetricError*>(&e) || dynamic_cast<const DegenerateChannelError*>(&e)) {
    return kNumeric;
  }
  return kData;
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  return hex(md, len);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Anomaly detection for solar thermal systems", kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "INI file with one [section] per subcommand; flags override it");
  app.require_subcommand(1);

  auto add_out = [&o](CLI::App* c) { c->add_option("--out,-o", o.out, "output directory")->capture_default_str(); };
  auto add_data = [&o](CLI::App* c) {
    c->add_option("--data,-d", o.data, "dataset directory (systems/, schema.txt, split.txt)")
        ->envname("STSAD_DATA_DIR");
  };

  auto* ingest = app.add_subcommand("ingest", "validate raw system CSVs and write a dataset directory");
  ingest->add_option("--raw", o.raw, "directory of raw system CSV files")->required();
  ingest->add_option("--schema", o.schema_file, "schema file (default: solar thermal channels)");
  ingest->add_option("--split", o.split_file, "split file (default: reference split)");
  add_out(ingest);

  auto* syn = app.add_subcommand("synth", "generate a synthetic dataset with injected faults");
  syn->add_option("--seed", o.synth.seed)->capture_default_str();
  syn->add_option("--systems", o.synth.num_systems)->capture_default_str();
  syn->add_option("--days", o.synth.days_per_system, "days per system")->capture_default_str();
  syn->add_option("--train-fraction", o.synth.train_fraction)->capture_default_str();
  syn->add_option("--validation-fraction", o.synth.validation_fraction)->capture_default_str();
  syn->add_option("--fault-prevalence", o.synth.fault_prevalence)->capture_default_str();
  syn->add_option("--merk-prevalence", o.synth.merk_prevalence)->capture_default_str();
  syn->add_option("--diversity", o.synth.diversity)->capture_default_str();
  syn->add_option("--noise", o.synth.noise_scale)->capture_default_str();
  syn->add_option("--start", o.synth.start_date)->capture_default_str();
  add_out(syn);

  auto* trn = app.add_subcommand("train", "train a detector on the training split");
  add_data(trn);
  trn->add_option("--detector", o.train_detector, "vae | vae-homoscedastic | pca")->capture_default_str();
  trn->add_option("--profile", o.profile, "desk | paper")->capture_default_str();
  trn->add_option("--seeds", o.seeds, "comma separated training seeds")->delimiter(',')->capture_default_str();
  trn->add_option("--steps", o.steps, "override the profile's update steps");
  trn->add_option("--lr", o.learning_rate, "override the profile's learning rate");
  trn->add_option("--components", o.components, "principal components (pca)")->capture_default_str();
  trn->add_option("--scaler", o.scaler, "error scaler for pca: znorm | iqr")->capture_default_str();
  add_out(trn);

  auto* scr = app.add_subcommand("score", "write per-day anomaly scores");
  add_data(scr);
  scr->add_option("--checkpoint", o.checkpoint)->required();
  scr->add_option("--detector", o.detector, "vae | vae-homoscedastic | pca-unscaled | pca-rescaled")
      ->capture_default_str();
  scr->add_option("--split", o.score_split, "train | validation | test | all")->capture_default_str();
  scr->add_option("--name", o.name, "score file stem (default: detector plus checkpoint seed)");
  add_out(scr);

  auto* swp = app.add_subcommand("sweep-pca", "evaluate PCA reconstruction over a range of component counts");
  add_data(swp);
  swp->add_option("--min", o.n_min)->capture_default_str();
  swp->add_option("--max", o.n_max, "default: number of channels");
  swp->add_option("--scaler", o.scaler, "znorm | iqr")->capture_default_str();
  add_out(swp);

  auto* evl = app.add_subcommand("eval", "compute metrics for score files and compare detectors");
  evl->add_option("--scores", o.score_files, "score CSV files")->required();
  evl->add_option("--merk", o.merk, "exclude | negative | positive")->capture_default_str();
  evl->add_flag("--clean-counts-as-one", o.clean_counts_as_one,
                "count systems without faults or alarms as F1 = 1 in the system-wise mean");
  add_out(evl);

  auto* rep = app.add_subcommand("report", "plot capped per-day scores per system");
  rep->add_option("--scores", o.scores)->required();
  rep->add_option("--system", o.systems, "system ids (default: all)");
  rep->add_option("--cap", o.cap, "display cap")->capture_default_str();
  add_out(rep);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Manifest manifest;
  manifest.command = cmd->get_name();
  manifest.config = "[" + cmd->get_name() + "]\n" + cmd->config_to_str(true, false);
  try {
    const std::string& name = manifest.command;
    if (name == "ingest") cmd_ingest(o, manifest, out);
    else if (name == "synth") cmd_synth(o, manifest, out);
    else if (name == "train") cmd_train(o, manifest, out);
    else if (name == "score") cmd_score(o, manifest, out);
    else if (name == "sweep-pca") cmd_sweep(o, manifest, out);
    else if (name == "eval") cmd_eval(o, manifest, out);
    else if (name == "report") cmd_report(o, manifest, out);
    manifest.write(o.out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace stsad::cli
