#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlstm/lstm.hpp"
#include "tlstm/projection.hpp"

namespace tlstm {

/// Binary checkpoint layout, all integers and floats little-endian:
///
///   offset  size  field
///   0       8     magic "TLSTMCK1"
///   8       4     u32 format version (1)
///   12      4     u32 layer count (2)
///   16      8     u64 input_dim
///   24      8     u64 hidden
///   32      8     f64 dropout_p
///   40      8     u64 parameter count P
///   48      8*P   f64 parameters in LstmParams::for_each_block order
///                 (layer0 w,u,b; layer1 w,u,b; w_fc; b_fc), matrices column-major
inline constexpr std::array<char, 8> kCheckpointMagic = {'T', 'L', 'S', 'T', 'M', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  std::array<unsigned char, sizeof(U)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw Error(Errc::IoError, "truncated checkpoint");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const LstmModel& m) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.params.layers.size()));
  detail::put_le<std::uint64_t>(out, m.input_dim());
  detail::put_le<std::uint64_t>(out, m.hidden());
  detail::put_le<double>(out, m.dropout_p);
  detail::put_le<std::uint64_t>(out, m.params.parameter_count());
  m.params.for_each_block([&](const auto& b) {
    for (Eigen::Index i = 0; i < b.size(); ++i) detail::put_le<double>(out, b(i));
  });
}

inline LstmModel load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw Error(Errc::IoError, "not a checkpoint file");
  if (detail::get_le<std::uint32_t>(in) != kCheckpointVersion) throw Error(Errc::IoError, "unsupported checkpoint version");
  if (detail::get_le<std::uint32_t>(in) != 2) throw Error(Errc::IoError, "checkpoint layer count must be 2");
  const auto input_dim = detail::get_le<std::uint64_t>(in);
  const auto hidden = detail::get_le<std::uint64_t>(in);
  const double dropout = detail::get_le<double>(in);
  const auto count = detail::get_le<std::uint64_t>(in);
  if (input_dim == 0 || hidden == 0 || input_dim > (1u << 20) || hidden > (1u << 16))
    throw Error(Errc::IoError, "implausible checkpoint dims");

  LstmModel m = init_params(0, input_dim, hidden, dropout);
  if (m.params.parameter_count() != count) throw Error(Errc::IoError, "checkpoint parameter count mismatch");
  m.params.for_each_block([&](auto b) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = detail::get_le<double>(in);
  });
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const LstmModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  save_checkpoint(out, m);
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

inline LstmModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  return load_checkpoint(in);
}

// JSON helpers for Eigen values. Matrices are stored as arrays of rows.

inline nlohmann::ordered_json to_json(const Vector& v) {
  return nlohmann::ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline nlohmann::ordered_json to_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

template <typename Json>
Vector vector_from_json(const Json& j) {
  const auto v = j.template get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename Json>
Matrix matrix_from_json(const Json& j) {
  const auto rows = j.template get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw Error(Errc::IoError, "ragged matrix in JSON");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

inline nlohmann::ordered_json to_json(const ProjectionModel& p) {
  nlohmann::ordered_json j;
  j["k"] = p.k;
  j["input_features"] = p.input_features();
  j["retained_variance_fraction"] = p.retained_variance_fraction();
  j["retained_eigenvalues"] = to_json(p.retained_eigenvalues);
  j["all_eigenvalues"] = to_json(p.all_eigenvalues);
  j["feature_means"] = to_json(p.feature_means);
  j["feature_scales"] = to_json(p.feature_scales);
  j["u_reduced"] = to_json(p.u_reduced);
  return j;
}

inline ProjectionModel projection_from_json(const nlohmann::json& j) {
  ProjectionModel p;
  p.k = j.at("k").get<std::size_t>();
  p.retained_eigenvalues = vector_from_json(j.at("retained_eigenvalues"));
  p.all_eigenvalues = vector_from_json(j.at("all_eigenvalues"));
  p.feature_means = vector_from_json(j.at("feature_means"));
  p.feature_scales = vector_from_json(j.at("feature_scales"));
  p.u_reduced = matrix_from_json(j.at("u_reduced"));
  if (static_cast<std::size_t>(p.u_reduced.cols()) != p.k) throw Error(Errc::IoError, "projection k does not match u_reduced");
  return p;
}

}  // namespace tlstm
