// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace randproj {

/// Base of every error raised by the library. Carries a stable code and the
/// name of the module that raised it so the CLI can emit structured records.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string module, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), module_(std::move(module)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  std::string code_;
  std::string module_;
};

#define RANDPROJ_DEFINE_ERROR(Name, Code)                                        \
  class Name : public Error {                                                    \
   public:                                                                       \
    Name(const std::string& module, const std::string& message)                  \
        : Error(Code, module, message) {}                                        \
  };

RANDPROJ_DEFINE_ERROR(InvalidArgument, "invalid_argument")
RANDPROJ_DEFINE_ERROR(DimensionMismatch, "dimension_mismatch")
RANDPROJ_DEFINE_ERROR(DomainError, "domain_error")
RANDPROJ_DEFINE_ERROR(ConeUndefined, "cone_undefined")
RANDPROJ_DEFINE_ERROR(GuaranteeVacuous, "guarantee_vacuous")
RANDPROJ_DEFINE_ERROR(NumericalBreakdown, "numerical_breakdown")
RANDPROJ_DEFINE_ERROR(NotOrthogonal, "not_orthogonal")
RANDPROJ_DEFINE_ERROR(RankDeficient, "rank_deficient")
RANDPROJ_DEFINE_ERROR(Unachievable, "unachievable")
RANDPROJ_DEFINE_ERROR(InsufficientSamples, "insufficient_samples")
RANDPROJ_DEFINE_ERROR(ConfigError, "config_error")

#undef RANDPROJ_DEFINE_ERROR

namespace detail {
inline void require(bool ok, const char* module, const std::string& message) {
  if (!ok) throw InvalidArgument(module, message);
}
}  // namespace detail

}  // namespace randproj
