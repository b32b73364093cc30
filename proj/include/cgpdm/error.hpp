#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cgpdm {

enum class ErrorKind {
  kParameterDomain,
  kShape,
  kNotPositiveDefinite,
  kState,
  kInput,
  kRankDeficient,
  kIntegrationBlowup,
  kSchema,
  kVariant,
  kInsufficientData,
  kRolloutDivergence,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every library failure is reported through this type. `module` names the
// component that raised it ("kernel-core", "trainer", ...) so the CLI can emit
// a one-line tagged message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace cgpdm
