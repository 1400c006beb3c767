#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dias {

enum class ErrorCode {
  NonPositiveRate,
  ZeroPhases,
  InvalidDistribution,
  SingularSubgenerator,
  NegativeTime,
  DropRatioOutOfRange,
  InvalidPmf,
  InvalidSpec,
  ProfileTooShort,
  AllRatesZero,
  InvalidProcess,
  NoStationaryDistribution,
  ZeroOfferedLoad,
  InvalidScenario,
  HorizonTooShort,
  InvalidCurve,
  InvalidTargets,
  PredictorFailure,
  Schema,
};

std::string_view to_string(ErrorCode code);
// UPPER_SNAKE form used in machine-readable error reports.
std::string code_name(ErrorCode code);

// All library failures surface as this exception; the code is stable and
// machine-readable, the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dias
