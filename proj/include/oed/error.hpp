#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace oed {

// Base of every error raised by the library. `code()` is a stable machine
// identifier that the service maps onto HTTP statuses and error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error("validation", join(violations)), violations_(std::move(violations)) {}
  explicit ValidationError(const std::string& violation)
      : ValidationError(std::vector<std::string>{violation}) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

#define OED_DEFINE_ERROR(Name, code_str)                                  \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(code_str, what) {}     \
  };

OED_DEFINE_ERROR(DimensionError, "dimension")
OED_DEFINE_ERROR(EncodingError, "encoding")
OED_DEFINE_ERROR(PreconditionError, "precondition")
OED_DEFINE_ERROR(InsufficientDataError, "insufficient_data")
OED_DEFINE_ERROR(ConditioningError, "conditioning")
OED_DEFINE_ERROR(SolverError, "solver_failure")
OED_DEFINE_ERROR(InfeasibleSpaceError, "infeasible_space")
OED_DEFINE_ERROR(ConstraintEvaluationError, "constraint_evaluation")
OED_DEFINE_ERROR(StateError, "illegal_transition")
OED_DEFINE_ERROR(NotFoundError, "not_found")
OED_DEFINE_ERROR(ConflictError, "conflict")
OED_DEFINE_ERROR(IntegrityError, "integrity")
OED_DEFINE_ERROR(SchemaVersionError, "schema_version")
OED_DEFINE_ERROR(ConfigurationError, "configuration")
OED_DEFINE_ERROR(NoModelError, "no_model")

#undef OED_DEFINE_ERROR

}  // namespace oed
