#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"

using namespace tlstm;

namespace {

SynthConfig small(std::size_t n = 4000, double noise = 0.02) {
  SynthConfig c;
  c.n_records = n;
  c.n_cycles = 6;
  c.noise_std = noise;
  return c;
}

}  // namespace

TEST(Synth, NoiseFreeSocMatchesCoulombCounting) {
  const SynthConfig cfg = small(5000, 0.0);
  const auto recs = generate(cfg);
  ASSERT_EQ(recs.size(), cfg.n_records);
  // Amp-hours integrated from the reported current, converted to percent of capacity.
  const double capacity_ah = cfg.capacity_kwh * 1000.0 / 350.0;
  double soc = recs[0].soc;
  double max_err = 0.0;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const double amp_hours = recs[i - 1].sum_current * static_cast<double>(recs[i].time - recs[i - 1].time) / 3600.0;
    soc = std::clamp(soc - 100.0 * amp_hours / capacity_ah, 0.0, 100.0);
    max_err = std::max(max_err, std::abs(soc - recs[i].soc));
  }
  EXPECT_LT(max_err, 1e-6);
}

TEST(Synth, NoiseFreeSocIsPiecewiseLinear) {
  const auto recs = generate(small(3000, 0.0));
  std::size_t breaks = 0;
  for (std::size_t i = 2; i < recs.size(); ++i) {
    const double d1 = recs[i - 1].soc - recs[i - 2].soc;
    const double d2 = recs[i].soc - recs[i - 1].soc;
    if (std::abs(d2 - d1) > 1e-9) ++breaks;
  }
  // One slope change at each segment boundary, two segments per cycle.
  EXPECT_LE(breaks, 2u * 6u);
}

TEST(Synth, SameSeedSameBytes) {
  const auto a = generate(small());
  const auto b = generate(small());
  EXPECT_EQ(a, b);
  std::ostringstream sa, sb;
  write_telemetry_csv(sa, a);
  write_telemetry_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  SynthConfig other = small();
  other.seed = 8;
  EXPECT_NE(generate(other), a);
}

TEST(Synth, RecordInvariants) {
  for (double noise : {0.0, 0.02, 0.2}) {
    const SynthConfig cfg = small(4000, noise);
    const auto recs = generate(cfg);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      ASSERT_GE(r.soc, 0.0);
      ASSERT_LE(r.soc, 100.0);
      ASSERT_GE(r.max_cell_volt, r.min_cell_volt);
      ASSERT_GE(r.max_temp, r.min_temp);
      const double avg = r.sum_voltage / cfg.n_cells;
      ASSERT_LE(r.min_cell_volt, avg);
      ASSERT_GE(r.max_cell_volt, avg);
      ASSERT_GE(r.speed, 0.0);
      if (i > 0) {
        ASSERT_GT(r.time, recs[i - 1].time);
        ASSERT_GE(r.sum_mileage, recs[i - 1].sum_mileage);
      }
    }
  }
}

TEST(Synth, SegmentsBehaveAsCharging) {
  const auto recs = generate(small(6000, 0.02));
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    const auto& r = recs[i];
    if (r.charge_status == 1) {
      EXPECT_LT(r.sum_current, 0.0);
      EXPECT_EQ(r.speed, 0.0);
      EXPECT_GE(recs[i + 1].soc, r.soc);
    } else {
      EXPECT_GT(r.speed, 0.0);
      EXPECT_GT(r.sum_current, 0.0);
      EXPECT_LE(recs[i + 1].soc, r.soc);
    }
  }
}

TEST(Synth, SegmentCurrentIsCappedForShortTraces) {
  for (std::size_t n : {50u, 1000u, 3000u}) {
    SynthConfig c;
    c.n_records = n;
    c.noise_std = 0.0;
    const double one_c = c.capacity_kwh * 1000.0 / 350.0;
    for (const auto& r : generate(c)) ASSERT_LE(std::abs(r.sum_current), 1.5 * one_c * (1 + 1e-12)) << n;
    c.noise_std = 0.02;
    std::stringstream csv;
    write_telemetry_csv(csv, generate(c));
    EXPECT_EQ(parse_telemetry(csv).dropped(), 0u) << n;
  }
}

TEST(Synth, MileageIntegratesSpeed) {
  const SynthConfig cfg = small(2000, 0.05);
  const auto recs = generate(cfg);
  double km = 0.0;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    km += recs[i - 1].speed * static_cast<double>(cfg.cadence_s) / 3600.0;
    ASSERT_NEAR(recs[i].sum_mileage, km, 1e-9 * std::max(1.0, km));
  }
}

TEST(Synth, PackVoltageTracksSoc) {
  const auto recs = generate(small(4000, 0.0));
  // Noise-free voltage is affine in SOC and current.
  Matrix a(static_cast<Eigen::Index>(recs.size()), 3);
  Vector v(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const auto& r = recs[static_cast<std::size_t>(i)];
    a.row(i) << 1.0, r.soc, r.sum_current;
    v(i) = r.sum_voltage;
  }
  const Vector coef = a.colPivHouseholderQr().solve(v);
  EXPECT_LT((a * coef - v).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_GT(coef(1), 0.0);
}

TEST(Synth, FeedsIngestWithZeroDrops) {
  std::stringstream csv;
  const auto recs = generate(small(5000, 0.2));
  write_telemetry_csv(csv, recs);
  const ParseReport rep = parse_telemetry(csv);
  EXPECT_EQ(rep.dropped(), 0u);
  EXPECT_EQ(rep.records.size(), recs.size());
}

TEST(Synth, RejectsInvalidConfig) {
  SynthConfig c = small();
  c.n_records = 0;
  EXPECT_THROW(generate(c), Error);
  c = small();
  c.noise_std = 0.25;
  EXPECT_THROW(generate(c), Error);
  c = small();
  c.capacity_kwh = 0.0;
  EXPECT_THROW(generate(c), Error);
}

TEST(Rng, StreamsAreReproducible) {
  Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(mix_seed(1, 2, 3), mix_seed(1, 3, 2));
  Rng c(5);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.015);
}
