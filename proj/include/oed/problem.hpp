#pragma once

#include <oed/error.hpp>
#include <oed/types.hpp>

#include <nlohmann/json_fwd.hpp>

#include <chrono>
#include <functional>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace oed {

enum class VariableKind { continuous, discrete, binary, categorical };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  // Continuous bounds are real; discrete bounds are integral values stored as double.
  double lower = 0.0;
  double upper = 1.0;
  std::vector<std::string> categories;

  // Number of encoded dimensions this variable occupies.
  int encoded_width() const {
    return kind == VariableKind::categorical ? static_cast<int>(categories.size()) : 1;
  }
};

struct LinearConstraint {
  // g(x) = coefficients . x + offset <= 0, x the encoded vector.
  std::vector<double> coefficients;
  double offset = 0.0;
};

struct BlackboxConstraint {
  std::string program;
  std::chrono::milliseconds timeout{std::chrono::hours(24)};
};

struct ConstraintSpec {
  std::string name;
  std::variant<LinearConstraint, BlackboxConstraint> form;

  bool is_linear() const { return std::holds_alternative<LinearConstraint>(form); }
};

enum class Sense { minimize, maximize };

struct ObjectiveSpec {
  std::string name;
  Sense sense = Sense::minimize;
};

struct Problem {
  std::vector<VariableSpec> variables;
  std::vector<ConstraintSpec> constraints;
  std::vector<ObjectiveSpec> objectives;

  int encoded_dim() const;
  int num_objectives() const { return static_cast<int>(objectives.size()); }
  const VariableSpec* find_variable(const std::string& name) const;
  bool has_blackbox_constraints() const;
};

// A single design variable value: real, integer, boolean or category label.
using DesignValue = std::variant<double, std::int64_t, bool, std::string>;

struct Design {
  std::map<std::string, DesignValue> values;

  bool operator==(const Design&) const = default;
};

/// Returns one message per broken invariant; empty when the problem is well formed.
std::vector<std::string> validate(const Problem& problem);

/// Throws ValidationError when `validate` reports anything.
void require_valid(const Problem& problem);

/// Violations of the Design invariants against `problem` (empty if valid).
std::vector<std::string> validate_design(const Problem& problem, const Design& design);

/// Maps a design onto the unit-box encoding: min-max for continuous and
/// discrete, {0,1} for binary, one-hot blocks for categorical.
Vector encode(const Problem& problem, const Design& design);

/// Inverse of `encode` with snapping: discrete rounds to the nearest integer,
/// binary thresholds at 0.5, categorical takes the argmax of its block
/// (ties resolve to the lowest index). Inputs outside [0,1] are clamped.
Design decode(const Problem& problem, const Eigen::Ref<const Vector>& encoded);

/// decode followed by encode; the snapped point the solver's relaxed vector represents.
Vector snap(const Problem& problem, const Eigen::Ref<const Vector>& encoded);

struct ConstraintReport {
  std::string name;
  bool feasible = true;
  double violation = 0.0;  // max(g, 0) for linear; 1 for a violated blackbox constraint
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<ConstraintReport> constraints;
};

/// Evaluates one blackbox constraint program; returns true when feasible.
/// Throws ConstraintEvaluationError when the program fails.
using BlackboxChecker =
    std::function<bool(const BlackboxConstraint&, const Design&)>;

/// Checks every constraint. Blackbox constraints are run through `checker`;
/// when no checker is supplied the external-program contract is used.
FeasibilityReport check_feasible(const Problem& problem, const Design& design,
                                 const BlackboxChecker& checker = {});

/// Sum of positive parts of all linear constraints at an encoded point.
double linear_violation(const Problem& problem, const Eigen::Ref<const Vector>& encoded);

/// Builds a linear constraint written in user units, e.g. {"x": 2.0, "y": 1.0}
/// with offset -5 for 2x + y - 5 <= 0, rewritten over the encoded vector.
/// Only continuous, discrete and binary variables may appear.
LinearConstraint linear_constraint_in_user_units(const Problem& problem,
                                                 const std::map<std::string, double>& terms,
                                                 double offset);

/// Sense conversion at the ingestion boundary: maximize objectives are negated.
Vector to_internal(const Problem& problem, const Eigen::Ref<const Vector>& user_values);
/// Inverse of `to_internal`.
Vector to_user(const Problem& problem, const Eigen::Ref<const Vector>& internal_values);

// Problem definition document (JSON tree with variables / constraints / objectives).
nlohmann::json problem_to_json(const Problem& problem);
Problem problem_from_json(const nlohmann::json& doc);

nlohmann::json design_to_json(const Problem& problem, const Design& design);
Design design_from_json(const Problem& problem, const nlohmann::json& doc);

std::string to_string(VariableKind kind);
std::string to_string(Sense sense);

/// Formats a design value for tables: shortest round-trip reals, integers,
/// `true`/`false`, category labels.
std::string format_value(const DesignValue& value);
/// Parses a table cell back into the value kind the variable expects.
DesignValue parse_value(const VariableSpec& spec, const std::string& text);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace oed
