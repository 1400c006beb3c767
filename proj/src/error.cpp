#include "dias/error.hpp"

#include <cctype>

namespace dias {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::ZeroPhases: return "ZeroPhases";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::SingularSubgenerator: return "SingularSubgenerator";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::DropRatioOutOfRange: return "DropRatioOutOfRange";
    case ErrorCode::InvalidPmf: return "InvalidPmf";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ProfileTooShort: return "ProfileTooShort";
    case ErrorCode::AllRatesZero: return "AllRatesZero";
    case ErrorCode::InvalidProcess: return "InvalidProcess";
    case ErrorCode::NoStationaryDistribution: return "NoStationaryDistribution";
    case ErrorCode::ZeroOfferedLoad: return "ZeroOfferedLoad";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::InvalidCurve: return "InvalidCurve";
    case ErrorCode::InvalidTargets: return "InvalidTargets";
    case ErrorCode::PredictorFailure: return "PredictorFailure";
    case ErrorCode::Schema: return "Schema";
  }
  return "Unknown";
}

std::string code_name(ErrorCode code) {
  const auto camel = to_string(code);
  std::string s;
  for (std::size_t i = 0; i < camel.size(); ++i) {
    const auto c = static_cast<unsigned char>(camel[i]);
    if (std::isupper(c) && i > 0) s.push_back('_');
    s.push_back(static_cast<char>(std::toupper(c)));
  }
  return s;
}

}  // namespace dias
