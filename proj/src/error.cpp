#include "cgpdm/error.hpp"

namespace cgpdm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParameterDomain: return "parameter-domain";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNotPositiveDefinite: return "not-positive-definite";
    case ErrorKind::kState: return "state";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kRankDeficient: return "rank-deficient";
    case ErrorKind::kIntegrationBlowup: return "integration-blowup";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kVariant: return "variant";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kRolloutDivergence: return "rollout-divergence";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(message), kind_(kind), module_(std::move(module)) {}

}  // namespace cgpdm
