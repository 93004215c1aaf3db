#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ergolq {

enum class Errc {
  InvalidInput,
  DimensionMismatch,
  NotStabilizing,
  SingularLinearSystem,
  StabilizerNotFound,
  RangeViolation,
  LostPositivity,
  LostStability,
  MaxIterations,
  NotPositiveDefinite,
  Diverging,
  NumericalBlowup,
  ConsistencyCheck,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotStabilizing: return "NotStabilizing";
    case Errc::SingularLinearSystem: return "SingularLinearSystem";
    case Errc::StabilizerNotFound: return "StabilizerNotFound";
    case Errc::RangeViolation: return "RangeViolation";
    case Errc::LostPositivity: return "LostPositivity";
    case Errc::LostStability: return "LostStability";
    case Errc::MaxIterations: return "MaxIterations";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::Diverging: return "Diverging";
    case Errc::NumericalBlowup: return "NumericalBlowup";
    case Errc::ConsistencyCheck: return "ConsistencyCheck";
  }
  return "Unknown";
}

/// Exception carrying a stable error code. Every failure raised by the
/// library is an `ergolq::Error`; callers switch on `code()`.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ergolq
