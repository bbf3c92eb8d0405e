#include "stsad/synthgen.hpp"

#include "stsad/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

namespace stsad::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRoom = 20.0;
constexpr double kColdWater = 12.0;
constexpr double kStoreMax = 88.0;

// Schema channel order.
enum Ch { TSA1, TSE, TW, TSV, TAM, VF, PWM, CTR, kChannels };
constexpr const char* kChannelNames[kChannels] = {"TSA1", "TSE", "TW", "TSV", "TAM", "VF", "pwm", "ctr"};

int channel_index(const std::string& name) {
  for (int i = 0; i < kChannels; ++i)
    if (name == kChannelNames[i]) return i;
  throw ParameterError("unknown synthetic channel '" + name + "'");
}

double quantize(double v) { return std::round(v * 1000.0) / 1000.0; }

int day_of_year(std::chrono::sys_days date) {
  const std::chrono::year_month_day ymd{date};
  const std::chrono::sys_days jan1{ymd.year() / std::chrono::January / 1};
  return static_cast<int>((date - jan1).count()) + 1;
}

bool in_window(const std::optional<FaultSpec>& f, int t) {
  return f && t >= f->onset && t < f->onset + f->duration;
}

}  // namespace

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::StuckSensor:
      return "stuck_sensor";
    case FaultKind::PumpLockedOn:
      return "pump_locked_on";
    case FaultKind::NightCirculation:
      return "night_circulation";
    case FaultKind::SensorOffset:
      return "sensor_offset";
    case FaultKind::NoFlow:
      return "no_flow";
  }
  return "stuck_sensor";
}

FaultKind parse_fault_kind(std::string_view text) {
  for (int k = 0; k < kNumFaultKinds; ++k) {
    if (text == to_string(static_cast<FaultKind>(k))) return static_cast<FaultKind>(k);
  }
  throw ParameterError("unknown fault kind '" + std::string(text) + "'");
}

void FaultSpec::validate() const {
  if (onset < 0 || duration <= 0 || onset + duration > kMinutesPerDay) {
    throw ParameterError("fault window [" + std::to_string(onset) + ", " + std::to_string(onset + duration) +
                         ") does not fit in a day");
  }
  if (kind == FaultKind::StuckSensor || kind == FaultKind::SensorOffset) channel_index(channel);
}

Schema synth_schema() { return Schema::solar_thermal(); }

SynthDay simulate_day(const DayContext& ctx, const std::optional<FaultSpec>& fault) {
  if (fault) fault->validate();
  const SystemParams& p = ctx.params;
  const double ns = ctx.noise_scale;
  Rng rng(ctx.noise_seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  const int doy = day_of_year(ctx.date);
  const double season = std::cos(kTwoPi * (doy - 172) / 365.0);
  const double season_lagged = std::cos(kTwoPi * (doy - 200) / 365.0);
  const double daylength = 12.0 + 4.0 * season;
  const double sunrise = 12.5 - daylength / 2.0;
  const double peak = p.irradiance_peak * (0.6 + 0.4 * season);
  const double cloudiness = ns > 0.0 ? std::pow(uniform(rng), 1.5) : 0.0;
  const double draw_jitter = ns > 0.0 ? 1.0 + 0.3 * ns * (2.0 * uniform(rng) - 1.0) : 1.0;
  const int stuck_or_offset = fault && (fault->kind == FaultKind::StuckSensor || fault->kind == FaultKind::SensorOffset)
                                  ? channel_index(fault->channel)
                                  : -1;

  double ambient_base = p.ambient_mean + p.ambient_amplitude * season_lagged;
  double tamb = ambient_base - p.diurnal_amplitude * (1.0 - 0.6 * cloudiness);
  double tc = tamb;
  double tsv = kRoom;
  double tb = 30.0 + 10.0 * season_lagged;
  double tt = tb + 12.0;
  double cloud_state = 0.0;
  double ambient_noise = 0.0;
  bool pump_on = false;

  SynthDay out;
  out.context = ctx;
  out.fault = fault;
  DayTrace& tr = out.trace;
  tr.system_id = p.system_id;
  tr.date = ctx.date;
  tr.values.resize(kMinutesPerDay, kChannels);
  tr.status_flags = StatusMatrix::Zero(kMinutesPerDay, 2);
  tr.label = fault ? DayLabel::Fault : DayLabel::Normal;

  for (int t = 0; t < kMinutesPerDay; ++t) {
    const double h = t / 60.0;
    const bool faulty = in_window(fault, t);
    if (faulty) tr.status_flags(t, 0) = 1;

    // Weather.
    const double phase = (h - sunrise) / daylength;
    const double g_clear = phase > 0.0 && phase < 1.0 ? peak * std::pow(std::sin(std::numbers::pi * phase), 1.5) : 0.0;
    const bool daylight = g_clear > 0.0;
    if (ns > 0.0) {
      cloud_state = 0.97 * cloud_state + 0.24 * normal(rng);
      ambient_noise = 0.98 * ambient_noise + 0.06 * ns * normal(rng);
    }
    const double cover = std::clamp(0.5 + 0.35 * cloud_state, 0.0, 1.0);
    const double irradiance = g_clear * (1.0 - 0.85 * cloudiness * cover);
    tamb = ambient_base + p.diurnal_amplitude * (1.0 - 0.6 * cloudiness) * std::sin(kTwoPi * (h - 9.0) / 24.0) +
           ambient_noise;

    // Measurements of the current state.
    const double temp_sigma = 0.15 * p.noise_level * ns * (1.0 + 4.0 * cloudiness * (daylight ? 1.0 : 0.0));
    double meas[kChannels];
    meas[TSA1] = tc + temp_sigma * normal(rng);
    meas[TSE] = tb + temp_sigma * normal(rng);
    meas[TW] = tt + temp_sigma * normal(rng);
    meas[TSV] = tsv + temp_sigma * normal(rng);
    meas[TAM] = tamb + temp_sigma * normal(rng);
    if (faulty && fault->kind == FaultKind::StuckSensor) meas[stuck_or_offset] = fault->value;
    if (faulty && fault->kind == FaultKind::SensorOffset) meas[stuck_or_offset] += fault->value;

    // Hysteresis controller on the measured collector/store differential.
    const double diff = meas[TSA1] - meas[TSE];
    if (pump_on && diff < 3.0) pump_on = false;
    if (!pump_on && diff > 7.0) pump_on = true;
    if (meas[TW] >= kStoreMax) pump_on = false;
    double pwm = pump_on ? std::clamp(0.3 + (diff - 3.0) / 15.0, 0.3, 1.0) : 0.0;
    if (faulty && fault->kind == FaultKind::PumpLockedOn) pwm = 1.0;

    double flow = pwm;
    if (faulty && fault->kind == FaultKind::NoFlow) flow = 0.0;
    if (faulty && fault->kind == FaultKind::NightCirculation && !daylight && pwm == 0.0) flow = 0.25;

    const double vf_sigma = 0.05 * p.noise_level * ns * (1.0 + 4.0 * cloudiness);
    meas[VF] = flow > 0.0 ? std::max(0.0, flow * p.flow_per_pwm + vf_sigma * normal(rng)) : 0.0;
    meas[PWM] = pwm;
    meas[CTR] = meas[TSA1] < 3.0 ? 1.0 : 0.0;

    meas[TSA1] = std::clamp(meas[TSA1], -20.0, 200.0);
    for (int c : {TSE, TW, TSV, TAM}) meas[c] = std::clamp(meas[c], -20.0, 200.0);
    for (int c = 0; c < kChannels; ++c) tr.values(t, c) = quantize(meas[c]);

    // Plant dynamics over the next minute.
    tc += p.collector_gain * irradiance - p.collector_loss * (tc - tamb) - p.coupling * flow * (tc - tb);
    tc = std::clamp(tc, -20.0, 200.0);
    if (flow > 0.0) {
      tsv += 0.3 * (tc - 1.5 - tsv);
    } else {
      tsv += 0.02 * (kRoom + 2.0 - tsv);
    }
    const double q = p.store_gain * flow * (tsv - tb);
    tb += q;
    tt += 0.5 * std::max(q, 0.0);
    if (tb > tt) tt = tb = 0.5 * (tb + tt);
    const bool drawing = (h >= 7.0 && h < 7.5) || (h >= 19.0 && h < 19.75);
    if (drawing) {
      const double d = p.draw_rate * draw_jitter;
      tt -= d * (tt - tb);
      tb -= d * (tb - kColdWater);
    }
    tb -= p.store_loss * std::max(tb - kRoom, 0.0);
    tt -= p.store_loss * std::max(tt - kRoom, 0.0);
  }
  return out;
}

SynthDay generate_nominal_day(Rng& rng, const SystemParams& params, std::chrono::sys_days date, double noise_scale) {
  if (noise_scale < 0.0) throw ParameterError("noise_scale must be >= 0");
  DayContext ctx{params, date, rng(), noise_scale};
  return simulate_day(ctx);
}

SynthDay inject_fault(const SynthDay& day, const FaultSpec& spec) {
  spec.validate();
  return simulate_day(day.context, spec);
}

FaultSpec sample_fault(Rng& rng, FaultKind kind) {
  std::uniform_int_distribution<int> duration_dist(360, kMinutesPerDay);
  std::uniform_real_distribution<double> uniform;
  FaultSpec f;
  f.kind = kind;
  f.duration = duration_dist(rng);
  const int slack = kMinutesPerDay - f.duration;
  switch (kind) {
    case FaultKind::StuckSensor:
      f.channel = "TSA1";
      f.value = 70.0 + 30.0 * uniform(rng);
      f.onset = std::uniform_int_distribution<int>(0, slack)(rng);
      break;
    case FaultKind::SensorOffset: {
      static const char* channels[] = {"TSA1", "TSE", "TW", "TSV", "TAM"};
      f.channel = channels[std::uniform_int_distribution<int>(0, 4)(rng)];
      const double magnitude = 12.0 + 13.0 * uniform(rng);
      f.value = uniform(rng) < 0.5 ? -magnitude : magnitude;
      f.onset = std::uniform_int_distribution<int>(0, slack)(rng);
      break;
    }
    case FaultKind::PumpLockedOn:
    case FaultKind::NightCirculation:
      f.onset = uniform(rng) < 0.5 ? 0 : slack;
      break;
    case FaultKind::NoFlow: {
      // Cover 11:00-13:00.
      const int lo = std::max(0, 780 - f.duration);
      const int hi = std::min(660, slack);
      f.onset = std::uniform_int_distribution<int>(lo, hi)(rng);
      break;
    }
  }
  return f;
}

SystemParams sample_params(Rng& rng, double diversity, std::string system_id) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto vary = [&](double v) { return v * (1.0 + diversity * u(rng)); };
  SystemParams p;
  p.system_id = std::move(system_id);
  p.collector_gain = vary(p.collector_gain);
  p.collector_loss = vary(p.collector_loss);
  p.coupling = vary(p.coupling);
  p.store_gain = vary(p.store_gain);
  p.store_loss = vary(p.store_loss);
  p.flow_per_pwm = vary(p.flow_per_pwm);
  p.draw_rate = vary(p.draw_rate);
  p.ambient_mean = vary(p.ambient_mean);
  p.ambient_amplitude = vary(p.ambient_amplitude);
  p.diurnal_amplitude = vary(p.diurnal_amplitude);
  p.irradiance_peak = vary(p.irradiance_peak);
  p.noise_level = vary(p.noise_level);
  return p;
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("invalid synthetic config: " + what);
  };
  require(num_systems >= 1, "num_systems must be >= 1");
  require(days_per_system >= 1, "days_per_system must be >= 1");
  require(train_fraction >= 0 && validation_fraction >= 0 && train_fraction + validation_fraction <= 1.0,
          "split fractions must lie in [0, 1] and sum to at most 1");
  require(fault_prevalence >= 0 && fault_prevalence <= 1, "fault_prevalence must lie in [0, 1]");
  require(merk_prevalence >= 0 && merk_prevalence <= 1, "merk_prevalence must lie in [0, 1]");
  require(fault_prevalence + merk_prevalence <= 1, "fault and merk prevalence exceed 1");
  require(diversity >= 0 && diversity < 1, "diversity must lie in [0, 1)");
  require(noise_scale >= 0, "noise_scale must be >= 0");
  double total = 0.0;
  for (double w : fault_weights) {
    require(w >= 0 && w <= 1, "fault probabilities must lie in [0, 1]");
    total += w;
  }
  require(total > 0 || fault_prevalence == 0, "at least one fault kind needs a positive probability");
  try {
    parse_date(start_date);
  } catch (const std::exception&) {
    require(false, "start_date must be YYYY-MM-DD");
  }
}

std::vector<DayTrace> SynthDataset::traces() const {
  std::vector<DayTrace> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.trace);
  return out;
}

std::vector<LabelRow> SynthDataset::labels() const {
  std::vector<LabelRow> out;
  out.reserve(days.size());
  for (const auto& d : days) {
    LabelRow row{d.trace.system_id, d.trace.date, d.trace.label, std::nullopt};
    if (d.fault) row.fault = d.fault->kind;
    out.push_back(row);
  }
  return out;
}

namespace {

// Evenly interleaved pick of `count` out of `n` positions.
bool spread_pick(int i, int count, int n) {
  return static_cast<long>(i + 1) * count / n > static_cast<long>(i) * count / n;
}

std::vector<int> choose(Rng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

SynthDataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int n = cfg.num_systems;
  const int n_train = static_cast<int>(std::lround(cfg.train_fraction * n));
  const int n_val = std::min(n - n_train, static_cast<int>(std::lround(cfg.validation_fraction * n)));
  const int n_test = n - n_train - n_val;

  // Roles alternate over the year so every role sees every season.
  std::vector<char> role(static_cast<std::size_t>(n), 'r');
  for (int i = 0; i < n; ++i)
    if (spread_pick(i, n_test, n)) role[static_cast<std::size_t>(i)] = 't';
  for (int i = 0, j = 0; i < n; ++i) {
    if (role[static_cast<std::size_t>(i)] == 't') continue;
    if (spread_pick(j, n_val, n - n_test)) role[static_cast<std::size_t>(i)] = 'v';
    ++j;
  }

  std::discrete_distribution<int> kind_dist(cfg.fault_weights.begin(), cfg.fault_weights.end());
  const int faults_per_system = static_cast<int>(std::lround(cfg.fault_prevalence * cfg.days_per_system));
  const int merks_per_system = std::min(cfg.days_per_system - faults_per_system,
                                        static_cast<int>(std::lround(cfg.merk_prevalence * cfg.days_per_system)));
  const std::chrono::sys_days base = parse_date(cfg.start_date);

  SynthDataset ds;
  ds.schema = synth_schema();
  for (int s = 0; s < n; ++s) {
    char id[16];
    std::snprintf(id, sizeof id, "syn%02d", s + 1);
    const SystemParams params = sample_params(rng, cfg.diversity, id);
    const auto start = base + std::chrono::days(std::lround(365.0 * s / n));
    const char r = role[static_cast<std::size_t>(s)];
    (r == 't' ? ds.split.test : r == 'v' ? ds.split.validation : ds.split.train).insert(id);

    std::vector<SynthDay> days;
    for (int d = 0; d < cfg.days_per_system; ++d) {
      days.push_back(generate_nominal_day(rng, params, start + std::chrono::days(d), cfg.noise_scale));
    }
    if (r == 't') {
      std::vector<int> picked = choose(rng, cfg.days_per_system, faults_per_system + merks_per_system);
      for (int k = 0; k < faults_per_system; ++k) {
        auto& day = days[static_cast<std::size_t>(picked[static_cast<std::size_t>(k)])];
        day = inject_fault(day, sample_fault(rng, static_cast<FaultKind>(kind_dist(rng))));
      }
      for (int k = faults_per_system; k < faults_per_system + merks_per_system; ++k) {
        auto& day = days[static_cast<std::size_t>(picked[static_cast<std::size_t>(k)])];
        const int onset = std::uniform_int_distribution<int>(0, kMinutesPerDay - 60)(rng);
        day.trace.status_flags.block(onset, 1, 60, 1).setOnes();
        day.trace.label = DayLabel::Merk;
      }
    }
    for (auto& d : days) ds.days.push_back(std::move(d));
  }
  return ds;
}

void write_system_csv(std::ostream& out, const std::vector<const DayTrace*>& days, const Schema& schema) {
  out << "timestamp,system_id";
  for (const auto& c : schema.channels) out << ',' << c.name;
  for (const auto& s : schema.statuses) out << ',' << s.name;
  out << '\n';
  std::string line;
  char buf[64];
  for (const DayTrace* d : days) {
    const std::int64_t day_start = static_cast<std::int64_t>(d->date.time_since_epoch().count()) * kMinutesPerDay;
    for (Eigen::Index t = 0; t < d->values.rows(); ++t) {
      line = format_timestamp(day_start + t);
      line += ',';
      line += d->system_id;
      for (Eigen::Index c = 0; c < d->values.cols(); ++c) {
        const auto res = std::to_chars(buf, buf + sizeof buf, d->values(t, c), std::chars_format::fixed, 3);
        line += ',';
        line.append(buf, res.ptr);
      }
      for (Eigen::Index c = 0; c < d->status_flags.cols(); ++c) {
        line += ',';
        line += std::to_string(d->status_flags(t, c));
      }
      line += '\n';
      out << line;
    }
  }
}

void write_labels(std::ostream& out, const std::vector<LabelRow>& rows) {
  out << "system_id,date,label,fault_kind\n";
  for (const auto& r : rows) {
    out << r.system_id << ',' << format_date(r.date) << ',' << stsad::to_string(r.label) << ','
        << (r.fault ? std::string(to_string(*r.fault)) : std::string("none")) << '\n';
  }
}

void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "systems");
  std::vector<std::string> order;
  for (const auto& d : dataset.days) {
    if (order.empty() || order.back() != d.trace.system_id) order.push_back(d.trace.system_id);
  }
  for (const auto& id : order) {
    std::vector<const DayTrace*> days;
    for (const auto& d : dataset.days)
      if (d.trace.system_id == id) days.push_back(&d.trace);
    std::ofstream out(dir / "systems" / (id + ".csv"));
    if (!out) throw Error("cannot write " + (dir / "systems" / (id + ".csv")).string());
    write_system_csv(out, days, dataset.schema);
  }
  std::ofstream schema(dir / "schema.txt");
  dataset.schema.write(schema);
  std::ofstream split(dir / "split.txt");
  dataset.split.write(split);
  std::ofstream labels(dir / "labels.csv");
  write_labels(labels, dataset.labels());
  if (!schema || !split || !labels) throw Error("cannot write dataset metadata under " + dir.string());
}

}  // namespace stsad::synth
