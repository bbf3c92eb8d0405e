#include "stsad/error.hpp"
#include "stsad/synthgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace stsad;
using namespace stsad::synth;

namespace {

constexpr int kTSA1 = 0, kTSE = 1, kTW = 2, kVF = 5, kPwm = 6;

DayContext context(const char* date, double noise_scale = 0.0, std::uint64_t seed = 11) {
  DayContext ctx;
  ctx.date = parse_date(date);
  ctx.noise_scale = noise_scale;
  ctx.noise_seed = seed;
  return ctx;
}

}  // namespace

TEST(NominalDay, ShapeBoundsAndLabel) {
  Rng rng(1);
  const SynthDay d = generate_nominal_day(rng, SystemParams{}, parse_date("2021-06-21"));
  ASSERT_EQ(d.trace.values.rows(), kMinutesPerDay);
  ASSERT_EQ(d.trace.values.cols(), 8);
  EXPECT_EQ(d.trace.label, DayLabel::Normal);
  EXPECT_FALSE(d.fault.has_value());
  EXPECT_GE(d.trace.values.leftCols(5).minCoeff(), -20.0);
  EXPECT_LE(d.trace.values.leftCols(5).maxCoeff(), 200.0);
  EXPECT_GE(d.trace.values.col(kVF).minCoeff(), 0.0);
  EXPECT_GE(d.trace.values.rightCols(2).minCoeff(), 0.0);
  EXPECT_LE(d.trace.values.rightCols(2).maxCoeff(), 1.0);
  EXPECT_GT(d.trace.values.col(kPwm).maxCoeff(), 0.0);
}

TEST(NominalDay, PumpOffAtNight) {
  for (const char* date : {"2021-01-15", "2021-06-21", "2021-10-01"}) {
    Rng rng(2);
    const SynthDay d = generate_nominal_day(rng, SystemParams{}, parse_date(date));
    for (int t = 0; t < 4 * 60; ++t) ASSERT_EQ(d.trace.values(t, kPwm), 0.0) << date << " minute " << t;
    for (int t = 23 * 60; t < kMinutesPerDay; ++t) ASSERT_EQ(d.trace.values(t, kPwm), 0.0) << date << " minute " << t;
  }
}

TEST(NominalDay, StoreCoolsWithoutFlow) {
  const SynthDay d = simulate_day(context("2021-04-10"));
  const double tol = 1e-3;
  for (int t = 1; t < kMinutesPerDay; ++t) {
    if (d.trace.values(t - 1, kVF) != 0.0) continue;
    ASSERT_LE(d.trace.values(t, kTSE), d.trace.values(t - 1, kTSE) + tol) << "minute " << t;
    ASSERT_LE(d.trace.values(t, kTW), d.trace.values(t - 1, kTW) + tol) << "minute " << t;
  }
}

TEST(NominalDay, SameSeedIsBitIdentical) {
  Rng a(5), b(5);
  const SystemParams p;
  const auto date = parse_date("2021-08-01");
  EXPECT_EQ(generate_nominal_day(a, p, date).trace.values, generate_nominal_day(b, p, date).trace.values);
}

TEST(NominalDay, NoiselessIsPeriodicInDayOfYear) {
  const SynthDay a = simulate_day(context("2021-05-01", 0.0, 1));
  const SynthDay b = simulate_day(context("2022-05-01", 0.0, 99));
  EXPECT_EQ(a.trace.values, b.trace.values);
  EXPECT_NE(a.trace.values, simulate_day(context("2021-05-02")).trace.values);
}

TEST(InjectFault, StuckSensorHoldsValue) {
  const SynthDay nominal = simulate_day(context("2021-06-01", 1.0));
  const SynthDay f = inject_fault(nominal, {FaultKind::StuckSensor, "TSA1", 90.0, 300, 600});
  EXPECT_EQ(f.trace.label, DayLabel::Fault);
  for (int t = 300; t < 900; ++t) ASSERT_EQ(f.trace.values(t, kTSA1), 90.0);
  EXPECT_EQ(f.trace.values.topRows(300), nominal.trace.values.topRows(300));
  EXPECT_EQ(f.trace.status_flags(300, 0), 1);
  EXPECT_EQ(f.trace.status_flags(299, 0), 0);
}

TEST(InjectFault, PumpLockedOnFullDay) {
  const SynthDay nominal = simulate_day(context("2021-02-01", 1.0));
  const SynthDay f = inject_fault(nominal, {FaultKind::PumpLockedOn, "TSA1", 0.0, 0, kMinutesPerDay});
  EXPECT_EQ(f.trace.values.col(kPwm).minCoeff(), 1.0);
  EXPECT_GT(f.trace.values.col(kVF).minCoeff(), 0.0);
}

TEST(InjectFault, NoFlowCausesStagnation) {
  const SynthDay nominal = simulate_day(context("2021-06-21"));
  const SynthDay f = inject_fault(nominal, {FaultKind::NoFlow, "TSA1", 0.0, 10 * 60, 4 * 60});
  EXPECT_GT(f.trace.values.col(kTSA1).maxCoeff(), nominal.trace.values.col(kTSA1).maxCoeff());
  for (int t = 10 * 60; t < 14 * 60; ++t) ASSERT_EQ(f.trace.values(t, kVF), 0.0);
}

TEST(InjectFault, InvalidWindowThrows) {
  const SynthDay nominal = simulate_day(context("2021-06-21"));
  EXPECT_THROW(inject_fault(nominal, {FaultKind::NoFlow, "TSA1", 0.0, 1000, 500}), ParameterError);
  EXPECT_THROW(inject_fault(nominal, {FaultKind::NoFlow, "TSA1", 0.0, -1, 10}), ParameterError);
  EXPECT_THROW(inject_fault(nominal, {FaultKind::StuckSensor, "nope", 0.0, 0, 10}), ParameterError);
}

// Mean absolute deviation over the window must beat three times the noise
// amplitude on at least one channel. The amplitude is the white-noise sigma
// implied by the nominal day's first differences, which over-counts real
// dynamics and so only makes the check stricter.
TEST(InjectFault, EveryKindSeparatesFromNoise) {
  Rng rng(17);
  const char* dates[] = {"2021-01-20", "2021-04-20", "2021-07-20", "2021-10-20"};
  for (int k = 0; k < kNumFaultKinds; ++k) {
    const auto kind = static_cast<FaultKind>(k);
    for (int trial = 0; trial < 8; ++trial) {
      DayContext ctx = context(dates[trial % 4], 1.0, 100 + trial);
      ctx.params = sample_params(rng, 0.2, "syn01");
      const SynthDay noisy = simulate_day(ctx);
      const FaultSpec spec = sample_fault(rng, kind);
      const SynthDay faulty = inject_fault(noisy, spec);

      bool separated = false;
      for (int c = 0; c < 8 && !separated; ++c) {
        const auto win = [&](const SynthDay& d) { return d.trace.values.col(c).segment(spec.onset, spec.duration); };
        const auto& v = noisy.trace.values.col(c);
        const double noise =
            (v.tail(kMinutesPerDay - 1) - v.head(kMinutesPerDay - 1)).cwiseAbs().mean() * std::sqrt(M_PI) / 2.0;
        const double dev = (win(faulty) - win(noisy)).cwiseAbs().mean();
        separated = dev > 3.0 * noise && dev > 0.0;
      }
      EXPECT_TRUE(separated) << to_string(kind) << " trial " << trial << " onset " << spec.onset << " duration "
                             << spec.duration;
    }
  }
}

TEST(GenerateDataset, SplitsAndPrevalence) {
  SynthConfig cfg;
  cfg.num_systems = 8;
  cfg.days_per_system = 5;
  cfg.fault_prevalence = 0.0;
  const SynthDataset none = generate_dataset(cfg);
  EXPECT_EQ(none.days.size(), 40u);
  EXPECT_EQ(none.split.train.size() + none.split.validation.size() + none.split.test.size(), 8u);
  for (const auto& d : none.days) EXPECT_EQ(d.trace.label, DayLabel::Normal);

  cfg.fault_prevalence = 1.0;
  const SynthDataset all = generate_dataset(cfg);
  for (const auto& d : all.days) {
    const bool test = all.split.test.count(d.trace.system_id) > 0;
    EXPECT_EQ(d.trace.label, test ? DayLabel::Fault : DayLabel::Normal);
  }

  cfg.fault_prevalence = 1.5;
  EXPECT_THROW(generate_dataset(cfg), ParameterError);
}

TEST(GenerateDataset, DefaultSizes) {
  const SynthDataset ds = generate_dataset(SynthConfig{});
  const PartitionedDays part = split_dataset(ds.traces(), ds.split);
  EXPECT_EQ(part.train.size(), 200u);
  EXPECT_EQ(part.validation.size(), 100u);
  EXPECT_EQ(part.test.size(), 100u);
  int faults = 0;
  for (const auto& d : part.test) faults += d.label == DayLabel::Fault;
  EXPECT_EQ(faults, 30);
}

TEST(GenerateDataset, CsvRoundTripsThroughDatasetIo) {
  SynthConfig cfg;
  cfg.num_systems = 4;
  cfg.days_per_system = 3;
  cfg.merk_prevalence = 0.5;
  const SynthDataset ds = generate_dataset(cfg);
  const std::vector<DayTrace> traces = ds.traces();
  std::size_t next = 0;
  while (next < traces.size()) {
    std::vector<const DayTrace*> group;
    const std::string id = traces[next].system_id;
    while (next < traces.size() && traces[next].system_id == id) group.push_back(&traces[next++]);
    std::stringstream io;
    write_system_csv(io, group, ds.schema);
    const AssembledDays back = assemble_days(parse_system_csv(io, ds.schema));
    ASSERT_EQ(back.days.size(), group.size());
    EXPECT_EQ(back.dropped_days, 0u);
    for (std::size_t i = 0; i < group.size(); ++i) {
      EXPECT_EQ(back.days[i].system_id, group[i]->system_id);
      EXPECT_EQ(back.days[i].date, group[i]->date);
      EXPECT_EQ(back.days[i].values, group[i]->values);
      EXPECT_EQ(back.days[i].status_flags, group[i]->status_flags);
      EXPECT_EQ(back.days[i].label, group[i]->label);
    }
  }
}

TEST(GenerateDataset, LabelsCsv) {
  SynthConfig cfg;
  cfg.num_systems = 4;
  cfg.days_per_system = 2;
  cfg.fault_prevalence = 1.0;
  const SynthDataset ds = generate_dataset(cfg);
  std::ostringstream out;
  write_labels(out, ds.labels());
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("system_id,date,label,fault_kind\n", 0), 0u);
  EXPECT_NE(text.find(",Fault,"), std::string::npos);
  EXPECT_NE(text.find(",Normal,none"), std::string::npos);
}
