#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tlstm/error.hpp"

namespace tlstm {

/// One telemetry row. Current sign convention: positive = discharge,
/// negative = charging.
struct TelemetryRecord {
  std::int64_t time = 0;  // Unix seconds, UTC
  int charge_status = 0;  // 1 while charging
  double speed = 0.0;     // km/h
  double sum_mileage = 0.0;
  double sum_voltage = 0.0;
  double sum_current = 0.0;
  double soc = 0.0;  // percent
  double max_cell_volt = 0.0;
  double min_cell_volt = 0.0;
  double max_temp = 0.0;
  double min_temp = 0.0;
  double cell_volt_diff = 0.0;

  friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

inline constexpr std::array<std::string_view, 12> kTelemetryColumns = {
    "TIME",          "CHARGE_STATUS", "SPEED",    "SUM_MILE_AGE", "SUM_VOLTAGE", "SUM_CURRENT",
    "SOC",           "MAX_CELL_VOLT", "MIN_CELL_VOLT", "MAX_TEMP", "MIN_TEMP",    "CELL_VOLT_DIFF"};

/// Canonical column name -> column name used in the file. Columns not in the
/// map are looked up under their canonical name.
using ColumnMap = std::map<std::string, std::string>;

struct ParseReport {
  std::vector<TelemetryRecord> records;
  std::size_t dropped_unparseable = 0;
  std::size_t dropped_invalid = 0;
  std::size_t dropped_duplicates = 0;
  std::size_t recomputed_cell_diff = 0;
  std::vector<std::string> warnings;

  std::size_t dropped() const noexcept {
    return dropped_unparseable + dropped_invalid + dropped_duplicates;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_fixed_digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return std::nullopt;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace detail

/// Accepts integer Unix seconds or ISO-8601 `YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|+HH:MM|-HH:MM]`.
/// A missing zone designator means UTC; fractional seconds are truncated.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  s = detail::trim(s);
  if (auto v = detail::parse_int(s)) return v;
  // YYYY-MM-DDTHH:MM:SS is 19 characters.
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    return std::nullopt;
  const auto y = detail::parse_fixed_digits(s, 0, 4);
  const auto mo = detail::parse_fixed_digits(s, 5, 2);
  const auto d = detail::parse_fixed_digits(s, 8, 2);
  const auto h = detail::parse_fixed_digits(s, 11, 2);
  const auto mi = detail::parse_fixed_digits(s, 14, 2);
  const auto se = detail::parse_fixed_digits(s, 17, 2);
  if (!y || !mo || !d || !h || !mi || !se || *h > 23 || *mi > 59 || *se > 60) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*mo)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;

  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t digits_start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == digits_start) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
      const auto oh = detail::parse_fixed_digits(s, pos + 1, 2);
      const auto om = detail::parse_fixed_digits(s, pos + 4, 2);
      if (!oh || !om) return std::nullopt;
      offset = (s[pos] == '+' ? 1 : -1) * (static_cast<std::int64_t>(*oh) * 3600 + *om * 60);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + *h * 3600 + *mi * 60 + *se - offset;
}

/// Shortest decimal representation that round-trips exactly.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

/// Parses a telemetry CSV. Rows are sorted by time and duplicate timestamps
/// keep the first row in file order. Rows with unparseable or out-of-range
/// mandatory values are dropped and counted; a row with the wrong number of
/// fields is a hard MalformedRow error naming the line. CELL_VOLT_DIFF is
/// optional and recomputed from the cell voltages when absent, empty or
/// inconsistent by more than 1e-6 V.
inline ParseReport parse_telemetry(std::istream& in, const ColumnMap& schema = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw Error(Errc::SchemaMismatch, "missing header row");

  const auto header = detail::split_csv_line(line);
  const std::size_t n_fields = header.size();
  std::array<std::optional<std::size_t>, kTelemetryColumns.size()> index{};
  for (std::size_t c = 0; c < kTelemetryColumns.size(); ++c) {
    std::string want(kTelemetryColumns[c]);
    if (auto it = schema.find(want); it != schema.end()) want = it->second;
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == want) index[c] = h;
    if (!index[c] && kTelemetryColumns[c] != "CELL_VOLT_DIFF")
      throw Error(Errc::SchemaMismatch, "missing mandatory column " + want);
  }

  ParseReport rep;
  auto warn = [&](std::size_t ln, const std::string& msg) {
    rep.warnings.push_back("line " + std::to_string(ln) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != n_fields)
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                          std::to_string(n_fields) + " fields, found " +
                                          std::to_string(fields.size()));

    TelemetryRecord r;
    bool ok = true;
    auto num = [&](std::size_t col, double& out) {
      const auto v = detail::parse_double(fields[*index[col]]);
      if (!v) {
        if (ok) warn(line_no, "unparseable " + std::string(kTelemetryColumns[col]));
        ok = false;
        return;
      }
      out = *v;
    };
    if (const auto t = parse_timestamp(fields[*index[0]])) {
      r.time = *t;
    } else {
      warn(line_no, "unparseable TIME");
      ok = false;
    }
    double status = 0.0;
    num(1, status);
    num(2, r.speed);
    num(3, r.sum_mileage);
    num(4, r.sum_voltage);
    num(5, r.sum_current);
    num(6, r.soc);
    num(7, r.max_cell_volt);
    num(8, r.min_cell_volt);
    num(9, r.max_temp);
    num(10, r.min_temp);
    if (!ok) {
      ++rep.dropped_unparseable;
      continue;
    }
    r.charge_status = static_cast<int>(status);

    const bool valid = (status == 0.0 || status == 1.0) && r.speed >= 0.0 && r.sum_mileage >= 0.0 &&
                       r.sum_voltage > 0.0 && r.soc >= 0.0 && r.soc <= 100.0 &&
                       r.max_cell_volt >= r.min_cell_volt && r.max_temp >= r.min_temp;
    if (!valid) {
      warn(line_no, "value out of range");
      ++rep.dropped_invalid;
      continue;
    }

    const double diff = r.max_cell_volt - r.min_cell_volt;
    std::optional<double> given;
    if (index[11]) given = detail::parse_double(fields[*index[11]]);
    if (given && std::abs(*given - diff) <= 1e-6) {
      r.cell_volt_diff = *given;
    } else {
      r.cell_volt_diff = diff;
      ++rep.recomputed_cell_diff;
    }
    rep.records.push_back(r);
  }

  std::stable_sort(rep.records.begin(), rep.records.end(),
                   [](const TelemetryRecord& a, const TelemetryRecord& b) { return a.time < b.time; });
  std::vector<TelemetryRecord> cleaned;
  cleaned.reserve(rep.records.size());
  for (const auto& r : rep.records) {
    if (!cleaned.empty() && cleaned.back().time == r.time) {
      ++rep.dropped_duplicates;
      continue;
    }
    if (!cleaned.empty() && r.sum_mileage < cleaned.back().sum_mileage) {
      ++rep.dropped_invalid;
      rep.warnings.push_back("time " + std::to_string(r.time) + ": mileage decreased");
      continue;
    }
    cleaned.push_back(r);
  }
  rep.records = std::move(cleaned);
  if (rep.records.empty()) throw Error(Errc::EmptyAfterCleaning, "no valid telemetry rows");
  return rep;
}

inline ParseReport parse_telemetry(const std::filesystem::path& path, const ColumnMap& schema = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  return parse_telemetry(in, schema);
}

inline void write_telemetry_csv(std::ostream& out, const std::vector<TelemetryRecord>& records) {
  for (std::size_t c = 0; c < kTelemetryColumns.size(); ++c)
    out << (c ? "," : "") << kTelemetryColumns[c];
  out << '\n';
  for (const auto& r : records) {
    out << r.time << ',' << r.charge_status << ',' << format_double(r.speed) << ','
        << format_double(r.sum_mileage) << ',' << format_double(r.sum_voltage) << ','
        << format_double(r.sum_current) << ',' << format_double(r.soc) << ','
        << format_double(r.max_cell_volt) << ',' << format_double(r.min_cell_volt) << ','
        << format_double(r.max_temp) << ',' << format_double(r.min_temp) << ','
        << format_double(r.cell_volt_diff) << '\n';
  }
}

inline void write_telemetry_csv(const std::filesystem::path& path, const std::vector<TelemetryRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  write_telemetry_csv(out, records);
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

}  // namespace tlstm
