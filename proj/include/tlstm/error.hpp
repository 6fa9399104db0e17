#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tlstm {

enum class Errc {
  InvalidArgument,
  DimMismatch,
  NonSymmetric,
  NoConvergence,
  RankTooLarge,
  FileNotFound,
  SchemaMismatch,
  MalformedRow,
  EmptyAfterCleaning,
  TooFewRecords,
  SeriesTooShort,
  EmptySplit,
  TapeMismatch,
  LengthMismatch,
  Diverged,
  ConfigError,
  IoError,
};

inline std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NonSymmetric: return "NonSymmetric";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::RankTooLarge: return "RankTooLarge";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case Errc::TooFewRecords: return "TooFewRecords";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::TapeMismatch: return "TapeMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Diverged: return "Diverged";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception type thrown by every module; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tlstm
