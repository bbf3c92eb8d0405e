#pragma once

#include "stsad/dataset_io.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace stsad::synth {

using Rng = std::mt19937_64;

enum class FaultKind { StuckSensor, PumpLockedOn, NightCirculation, SensorOffset, NoFlow };
inline constexpr int kNumFaultKinds = 5;

std::string_view to_string(FaultKind kind);
FaultKind parse_fault_kind(std::string_view text);

/// `channel` and `value` apply to StuckSensor (the stuck reading) and
/// SensorOffset (the added delta).
struct FaultSpec {
  FaultKind kind = FaultKind::StuckSensor;
  std::string channel = "TSA1";
  double value = 0.0;
  int onset = 0;
  int duration = kMinutesPerDay;

  void validate() const;
};

/// Per-system latent parameters of the phenomenological plant.
struct SystemParams {
  std::string system_id = "syn00";
  double collector_gain = 2.0;    // K/min at full irradiance
  double collector_loss = 0.02;   // 1/min towards ambient
  double coupling = 0.06;         // 1/min towards the store at full flow
  double store_gain = 0.0015;     // 1/min of heat exchanger transfer
  double store_loss = 0.0004;     // 1/min towards the room
  double flow_per_pwm = 10.0;     // l/min at pwm = 1
  double draw_rate = 0.01;        // 1/min during hot-water draws
  double ambient_mean = 10.0;
  double ambient_amplitude = 10.0;
  double diurnal_amplitude = 5.0;
  double irradiance_peak = 1.0;
  double noise_level = 1.0;
};

/// Everything needed to re-simulate a day exactly.
struct DayContext {
  SystemParams params;
  std::chrono::sys_days date;
  std::uint64_t noise_seed = 0;
  double noise_scale = 1.0;
};

struct SynthDay {
  DayTrace trace;
  DayContext context;
  std::optional<FaultSpec> fault;
};

/// Channel order and status columns used by every generated trace.
Schema synth_schema();

/// Minute-level simulation; the fault (if any) acts inside its window and
/// downstream channels follow from the altered dynamics.
SynthDay simulate_day(const DayContext& context, const std::optional<FaultSpec>& fault = std::nullopt);

/// Draws the day's noise seed from `rng`. noise_scale = 0 removes sensor
/// noise, clouds and draw jitter, which makes the day a pure function of
/// the parameters and the day of year.
SynthDay generate_nominal_day(Rng& rng, const SystemParams& params, std::chrono::sys_days date,
                              double noise_scale = 1.0);

/// Re-simulates the day with the same noise realisation and the fault
/// applied; the label becomes Fault and `sto` is raised over the window.
SynthDay inject_fault(const SynthDay& day, const FaultSpec& spec);

/// Draws a fault of the given kind with a window of 360 to 1440 minutes.
/// Pump faults cover part of the night; flow loss covers midday.
FaultSpec sample_fault(Rng& rng, FaultKind kind);

SystemParams sample_params(Rng& rng, double diversity, std::string system_id);

struct SynthConfig {
  std::uint64_t seed = 7;
  int num_systems = 20;
  int days_per_system = 20;
  double train_fraction = 0.5;
  double validation_fraction = 0.25;
  double fault_prevalence = 0.3;
  double merk_prevalence = 0.0;
  double diversity = 0.2;
  double noise_scale = 1.0;
  std::array<double, kNumFaultKinds> fault_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::string start_date = "2021-01-01";

  void validate() const;
};

struct LabelRow {
  std::string system_id;
  std::chrono::sys_days date;
  DayLabel label = DayLabel::Normal;
  std::optional<FaultKind> fault;
};

struct SynthDataset {
  Schema schema;
  DatasetSplit split;
  std::vector<SynthDay> days;  // grouped by system, chronological

  std::vector<DayTrace> traces() const;
  std::vector<LabelRow> labels() const;
};

/// Train and validation systems are all nominal; each test system carries
/// exactly round(fault_prevalence * days_per_system) fault days.
SynthDataset generate_dataset(const SynthConfig& cfg);

/// dataset_io CSV of one system's consecutive days.
void write_system_csv(std::ostream& out, const std::vector<const DayTrace*>& days, const Schema& schema);

/// Columns: system_id,date,label,fault_kind.
void write_labels(std::ostream& out, const std::vector<LabelRow>& rows);

/// Writes systems/<id>.csv, schema.txt, split.txt and labels.csv.
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

}  // namespace stsad::synth
