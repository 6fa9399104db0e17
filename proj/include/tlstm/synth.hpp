#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "tlstm/telemetry.hpp"

namespace tlstm {

/// Seeded random stream used by the generator and by weight/dropout/shuffle
/// draws. Raw bits come from std::mt19937_64 (sequence fixed by the C++
/// standard); uniform() = (bits >> 11) * 2^-53 in [0, 1); normal() is
/// Box-Muller on two fresh uniforms: sqrt(-2 ln(1 - u1)) * cos(2 pi u2).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  /// Uniform integer in [0, n) by rejection, n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = 0;
    do x = engine_(); while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and up to two indices
/// (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

struct SynthConfig {
  std::size_t n_records = 50000;
  std::int64_t cadence_s = 10;
  std::uint64_t seed = 7;
  double noise_std = 0.02;
  std::size_t n_cycles = 40;
  double capacity_kwh = 60.0;
  std::int64_t start_time = 1700000000;
  int n_cells = 96;
};

/// Pack model constants shared by the generator and its tests.
struct PackModel {
  static constexpr double kNominalVoltage = 350.0;
  static constexpr double kCellOcvAtEmpty = 3.3;
  static constexpr double kCellOcvSlope = 0.009;  // V per SOC percent
  static constexpr double kPackResistance = 0.1;  // ohm
  static constexpr double kMinCRate = 0.1;
  static constexpr double kMaxCRate = 1.5;

  static double capacity_ah(const SynthConfig& cfg) { return cfg.capacity_kwh * 1000.0 / kNominalVoltage; }
  /// SOC change in percent for `current` amps held for `dt` seconds.
  static double soc_delta(double current, double dt, double capacity_ah) {
    return -current * dt / (36.0 * capacity_ah);
  }
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_records == 0) throw Error(Errc::ConfigError, "n_records must be positive");
  if (cfg.cadence_s <= 0) throw Error(Errc::ConfigError, "cadence_s must be positive");
  if (cfg.n_cycles == 0) throw Error(Errc::ConfigError, "n_cycles must be positive");
  if (!(cfg.capacity_kwh > 0.0)) throw Error(Errc::ConfigError, "capacity_kwh must be positive");
  if (!(cfg.noise_std >= 0.0 && cfg.noise_std <= 0.2)) throw Error(Errc::ConfigError, "noise_std must be in [0, 0.2]");
  if (cfg.n_cells <= 0) throw Error(Errc::ConfigError, "n_cells must be positive");
}

/// Synthetic charge/discharge telemetry. Each cycle is a driving discharge
/// segment followed by a charging segment. Segment currents are chosen so that
/// SOC moves linearly toward a drawn target; with noise, current and speed
/// jitter multiplicatively and sensor channels get additive Gaussian noise.
/// SOC always integrates the reported current (coulomb counting) and is
/// clamped to [0, 100]. Segment current magnitudes are clamped to
/// [kMinCRate, kMaxCRate], so short segments may stop short of their target.
inline std::vector<TelemetryRecord> generate(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const double noise = cfg.noise_std;
  const double dt = static_cast<double>(cfg.cadence_s);
  const double ah = PackModel::capacity_ah(cfg);
  const std::size_t cycles = std::max<std::size_t>(1, std::min(cfg.n_cycles, cfg.n_records / 2));
  const double i_min = PackModel::kMinCRate * ah;
  const double i_max = PackModel::kMaxCRate * ah;
  const std::size_t per_cycle = cfg.n_records / cycles;

  std::vector<TelemetryRecord> out;
  out.reserve(cfg.n_records);

  double soc = rng.uniform(80.0, 95.0);
  double mileage = 0.0;
  double batt_temp = 20.0;

  auto emit = [&](int status, double speed, double current) {
    const std::int64_t t = cfg.start_time + static_cast<std::int64_t>(out.size()) * cfg.cadence_s;
    TelemetryRecord r;
    r.time = t;
    r.charge_status = status;
    r.speed = speed;
    r.sum_mileage = mileage;
    r.sum_current = current;
    r.soc = soc;

    const double cell_ocv = PackModel::kCellOcvAtEmpty + PackModel::kCellOcvSlope * soc;
    r.sum_voltage = cfg.n_cells * cell_ocv - PackModel::kPackResistance * current + 10.0 * noise * rng.normal();
    const double spread = 0.005 + 0.0002 * std::abs(current) + std::abs(0.01 * noise * rng.normal());
    const double avg = r.sum_voltage / cfg.n_cells;
    r.max_cell_volt = avg + 0.6 * spread;
    r.min_cell_volt = avg - 0.4 * spread;
    r.cell_volt_diff = r.max_cell_volt - r.min_cell_volt;

    const double day_phase = 2.0 * std::numbers::pi * static_cast<double>(t % 86400) / 86400.0;
    const double ambient = 20.0 - 6.0 * std::cos(day_phase);
    batt_temp += dt / 1800.0 * (ambient + 0.08 * std::abs(current) - batt_temp);
    r.max_temp = batt_temp + 1.5 + 5.0 * noise * rng.normal();
    r.min_temp = r.max_temp - (2.5 + 0.01 * std::abs(current) + std::abs(5.0 * noise * rng.normal()));
    out.push_back(r);

    mileage += speed * dt / 3600.0;
    soc = std::clamp(soc + PackModel::soc_delta(current, dt, ah), 0.0, 100.0);
  };

  for (std::size_t c = 0; c < cycles; ++c) {
    const std::size_t n = c + 1 == cycles ? cfg.n_records - out.size() : per_cycle;
    std::size_t n_dis = static_cast<std::size_t>(std::lround(rng.uniform(0.55, 0.70) * static_cast<double>(n)));
    n_dis = std::clamp<std::size_t>(n_dis, 1, std::max<std::size_t>(1, n - 1));
    const std::size_t n_chg = n - n_dis;

    const double soc_lo = rng.uniform(15.0, 35.0);
    const double speed_seg = rng.uniform(30.0, 90.0);
    const double i_dis = std::clamp((soc - soc_lo) * 36.0 * ah / (static_cast<double>(n_dis) * dt), i_min, i_max);
    for (std::size_t k = 0; k < n_dis; ++k) {
      const double speed = std::max(0.5, speed_seg * (1.0 + 5.0 * noise * rng.normal()));
      const double current = i_dis * (speed / speed_seg) * (1.0 + noise * rng.normal());
      emit(0, speed, current);
    }

    const double soc_hi = rng.uniform(85.0, 100.0);
    if (n_chg == 0) continue;
    const double i_chg = -std::clamp((soc_hi - soc) * 36.0 * ah / (static_cast<double>(n_chg) * dt), i_min, i_max);
    for (std::size_t k = 0; k < n_chg; ++k) emit(1, 0.0, i_chg * (1.0 + noise * rng.normal()));
  }
  return out;
}

}  // namespace tlstm
