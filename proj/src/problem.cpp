#include <oed/problem.hpp>
#include <oed/process.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace oed {

using nlohmann::json;

namespace {

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

const char* kind_names[] = {"continuous", "discrete", "binary", "categorical"};

VariableKind parse_kind(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kind_names[i]) return static_cast<VariableKind>(i);
  throw ValidationError("unknown variable type '" + s + "'");
}

Sense parse_sense(const std::string& s) {
  if (s == "minimize") return Sense::minimize;
  if (s == "maximize") return Sense::maximize;
  throw ValidationError("unknown objective sense '" + s + "'");
}

// Integer view of a discrete value; accepts integral reals.
std::optional<std::int64_t> as_integer(const DesignValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v); d && is_integral(*d)) return static_cast<std::int64_t>(*d);
  return std::nullopt;
}

std::optional<double> as_real(const DesignValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::nullopt;
}

}  // namespace

std::string to_string(VariableKind kind) { return kind_names[static_cast<int>(kind)]; }
std::string to_string(Sense sense) { return sense == Sense::minimize ? "minimize" : "maximize"; }

int Problem::encoded_dim() const {
  int d = 0;
  for (const auto& v : variables) d += v.encoded_width();
  return d;
}

const VariableSpec* Problem::find_variable(const std::string& name) const {
  for (const auto& v : variables)
    if (v.name == name) return &v;
  return nullptr;
}

bool Problem::has_blackbox_constraints() const {
  return std::any_of(constraints.begin(), constraints.end(),
                     [](const ConstraintSpec& c) { return !c.is_linear(); });
}

std::vector<std::string> validate(const Problem& problem) {
  std::vector<std::string> out;
  if (problem.variables.empty()) out.push_back("variables: at least one variable required");
  if (problem.objectives.size() < 2) out.push_back("objectives: fewer than 2 objectives");

  std::set<std::string> names;
  auto check_name = [&](const std::string& section, const std::string& name) {
    if (name.empty()) out.push_back(section + ": empty name");
    else if (!names.insert(name).second) out.push_back(section + "." + name + ": duplicate name");
  };

  for (const auto& v : problem.variables) {
    check_name("variables", v.name);
    const std::string where = "variables." + v.name;
    switch (v.kind) {
      case VariableKind::continuous:
        if (!std::isfinite(v.lower) || !std::isfinite(v.upper)) out.push_back(where + ".bounds: non-finite");
        else if (!(v.lower < v.upper)) out.push_back(where + ".bounds: bounds reversed");
        break;
      case VariableKind::discrete:
        if (!is_integral(v.lower) || !is_integral(v.upper)) out.push_back(where + ".bounds: not integral");
        else if (!(v.lower < v.upper)) out.push_back(where + ".bounds: bounds reversed");
        break;
      case VariableKind::binary:
        if (!v.categories.empty()) out.push_back(where + ".categories: binary takes no categories");
        break;
      case VariableKind::categorical: {
        if (v.categories.empty()) out.push_back(where + ".categories: empty");
        std::set<std::string> labels(v.categories.begin(), v.categories.end());
        if (labels.size() != v.categories.size()) out.push_back(where + ".categories: duplicate label");
        break;
      }
    }
  }

  const int dim = problem.encoded_dim();
  for (const auto& c : problem.constraints) {
    check_name("constraints", c.name);
    const std::string where = "constraints." + c.name;
    if (const auto* lin = std::get_if<LinearConstraint>(&c.form)) {
      if (static_cast<int>(lin->coefficients.size()) != dim) {
        out.push_back(where + ".coefficients: length " + std::to_string(lin->coefficients.size()) +
                      " does not match encoded dimension " + std::to_string(dim));
        continue;
      }
      if (!std::isfinite(lin->offset)) out.push_back(where + ".offset: non-finite");
      int col = 0;
      for (const auto& v : problem.variables) {
        for (int k = 0; k < v.encoded_width(); ++k, ++col) {
          const double a = lin->coefficients[col];
          if (!std::isfinite(a)) out.push_back(where + ".coefficients: non-finite");
          else if (v.kind == VariableKind::categorical && a != 0.0)
            out.push_back(where + ".coefficients: categorical variable " + v.name +
                          " cannot appear in a linear constraint");
        }
      }
    } else {
      const auto& bb = std::get<BlackboxConstraint>(c.form);
      if (bb.program.empty()) out.push_back(where + ".program: empty");
      if (bb.timeout.count() <= 0) out.push_back(where + ".timeout: must be positive");
    }
  }

  for (const auto& o : problem.objectives) check_name("objectives", o.name);
  return out;
}

void require_valid(const Problem& problem) {
  auto v = validate(problem);
  if (!v.empty()) throw ValidationError(std::move(v));
}

std::vector<std::string> validate_design(const Problem& problem, const Design& design) {
  std::vector<std::string> out;
  for (const auto& [name, _] : design.values)
    if (!problem.find_variable(name)) out.push_back(name + ": unknown variable");
  for (const auto& v : problem.variables) {
    auto it = design.values.find(v.name);
    if (it == design.values.end()) {
      out.push_back(v.name + ": missing value");
      continue;
    }
    const DesignValue& val = it->second;
    switch (v.kind) {
      case VariableKind::continuous: {
        auto x = as_real(val);
        if (!x || !std::isfinite(*x)) out.push_back(v.name + ": expected a real value");
        else if (*x < v.lower || *x > v.upper) out.push_back(v.name + ": value out of bounds");
        break;
      }
      case VariableKind::discrete: {
        auto x = as_integer(val);
        if (!x) out.push_back(v.name + ": expected an integer value");
        else if (*x < v.lower || *x > v.upper) out.push_back(v.name + ": value out of bounds");
        break;
      }
      case VariableKind::binary:
        if (!std::holds_alternative<bool>(val)) out.push_back(v.name + ": expected a boolean value");
        break;
      case VariableKind::categorical: {
        const auto* s = std::get_if<std::string>(&val);
        if (!s) out.push_back(v.name + ": expected a category label");
        else if (std::find(v.categories.begin(), v.categories.end(), *s) == v.categories.end())
          out.push_back(v.name + ": unknown category '" + *s + "'");
        break;
      }
    }
  }
  return out;
}

Vector encode(const Problem& problem, const Design& design) {
  Vector x(problem.encoded_dim());
  int col = 0;
  for (const auto& v : problem.variables) {
    auto it = design.values.find(v.name);
    if (it == design.values.end()) throw EncodingError(v.name + ": missing value");
    const DesignValue& val = it->second;
    switch (v.kind) {
      case VariableKind::continuous: {
        auto r = as_real(val);
        if (!r || !std::isfinite(*r)) throw EncodingError(v.name + ": expected a real value");
        if (*r < v.lower || *r > v.upper) throw EncodingError(v.name + ": value out of bounds");
        x(col++) = (*r - v.lower) / (v.upper - v.lower);
        break;
      }
      case VariableKind::discrete: {
        auto i = as_integer(val);
        if (!i) throw EncodingError(v.name + ": expected an integer value");
        if (*i < v.lower || *i > v.upper) throw EncodingError(v.name + ": value out of bounds");
        x(col++) = (static_cast<double>(*i) - v.lower) / (v.upper - v.lower);
        break;
      }
      case VariableKind::binary: {
        const auto* b = std::get_if<bool>(&val);
        if (!b) throw EncodingError(v.name + ": expected a boolean value");
        x(col++) = *b ? 1.0 : 0.0;
        break;
      }
      case VariableKind::categorical: {
        const auto* s = std::get_if<std::string>(&val);
        if (!s) throw EncodingError(v.name + ": expected a category label");
        auto pos = std::find(v.categories.begin(), v.categories.end(), *s);
        if (pos == v.categories.end()) throw EncodingError(v.name + ": unknown category '" + *s + "'");
        const auto hot = pos - v.categories.begin();
        for (int k = 0; k < v.encoded_width(); ++k) x(col++) = (k == hot) ? 1.0 : 0.0;
        break;
      }
    }
  }
  return x;
}

Design decode(const Problem& problem, const Eigen::Ref<const Vector>& encoded) {
  if (encoded.size() != problem.encoded_dim())
    throw DimensionError("decode: expected " + std::to_string(problem.encoded_dim()) +
                         " encoded values, got " + std::to_string(encoded.size()));
  Design d;
  int col = 0;
  for (const auto& v : problem.variables) {
    switch (v.kind) {
      case VariableKind::continuous: {
        const double u = std::clamp(encoded(col++), 0.0, 1.0);
        d.values[v.name] = std::clamp(v.lower + u * (v.upper - v.lower), v.lower, v.upper);
        break;
      }
      case VariableKind::discrete: {
        const double u = std::clamp(encoded(col++), 0.0, 1.0);
        const double snapped = std::clamp(std::round(v.lower + u * (v.upper - v.lower)), v.lower, v.upper);
        d.values[v.name] = static_cast<std::int64_t>(snapped);
        break;
      }
      case VariableKind::binary:
        d.values[v.name] = encoded(col++) >= 0.5;
        break;
      case VariableKind::categorical: {
        int best = 0;
        for (int k = 1; k < v.encoded_width(); ++k)
          if (encoded(col + k) > encoded(col + best)) best = k;
        col += v.encoded_width();
        d.values[v.name] = v.categories[best];
        break;
      }
    }
  }
  return d;
}

Vector snap(const Problem& problem, const Eigen::Ref<const Vector>& encoded) {
  return encode(problem, decode(problem, encoded));
}

double linear_violation(const Problem& problem, const Eigen::Ref<const Vector>& encoded) {
  double total = 0.0;
  for (const auto& c : problem.constraints) {
    if (const auto* lin = std::get_if<LinearConstraint>(&c.form)) {
      const Eigen::Map<const Vector> a(lin->coefficients.data(), static_cast<Eigen::Index>(lin->coefficients.size()));
      total += std::max(0.0, a.dot(encoded) + lin->offset);
    }
  }
  return total;
}

namespace {

bool run_blackbox_program(const Problem& problem, const BlackboxConstraint& bb, const Design& design) {
  if (!is_executable(bb.program))
    throw ConstraintEvaluationError("constraint program not executable: " + bb.program);
  TempFile input(json{{"design", design_to_json(problem, design)}, {"record_id", 0}}.dump());
  auto result = run_process(bb.program, {input.path().string()}, bb.timeout);
  if (result.timed_out) throw ConstraintEvaluationError("constraint program timeout: " + bb.program);
  if (result.exit_code != 0)
    throw ConstraintEvaluationError("constraint program exit code " + std::to_string(result.exit_code));
  try {
    auto doc = json::parse(result.out);
    return doc.value("feasible", true);
  } catch (const json::exception& e) {
    throw ConstraintEvaluationError(std::string("constraint program output: ") + e.what());
  }
}

}  // namespace

FeasibilityReport check_feasible(const Problem& problem, const Design& design, const BlackboxChecker& checker) {
  const Vector x = encode(problem, design);
  FeasibilityReport report;
  for (const auto& c : problem.constraints) {
    ConstraintReport r{c.name, true, 0.0};
    if (const auto* lin = std::get_if<LinearConstraint>(&c.form)) {
      const Eigen::Map<const Vector> a(lin->coefficients.data(), static_cast<Eigen::Index>(lin->coefficients.size()));
      const double g = a.dot(x) + lin->offset;
      r.feasible = g <= 0.0;
      r.violation = std::max(0.0, g);
    } else {
      const auto& bb = std::get<BlackboxConstraint>(c.form);
      const bool ok = checker ? checker(bb, design) : run_blackbox_program(problem, bb, design);
      r.feasible = ok;
      r.violation = ok ? 0.0 : 1.0;
    }
    report.feasible = report.feasible && r.feasible;
    report.constraints.push_back(std::move(r));
  }
  return report;
}

LinearConstraint linear_constraint_in_user_units(const Problem& problem,
                                                 const std::map<std::string, double>& terms, double offset) {
  LinearConstraint out;
  out.coefficients.assign(problem.encoded_dim(), 0.0);
  out.offset = offset;
  for (const auto& [name, _] : terms)
    if (!problem.find_variable(name)) throw ValidationError("constraint references unknown variable " + name);
  int col = 0;
  for (const auto& v : problem.variables) {
    auto it = terms.find(v.name);
    if (it != terms.end()) {
      if (v.kind == VariableKind::categorical)
        throw ValidationError("categorical variable " + v.name + " cannot appear in a linear constraint");
      // user value = lower + (upper - lower) * encoded; binary is already 0/1.
      if (v.kind == VariableKind::binary) {
        out.coefficients[col] = it->second;
      } else {
        out.coefficients[col] = it->second * (v.upper - v.lower);
        out.offset += it->second * v.lower;
      }
    }
    col += v.encoded_width();
  }
  return out;
}

Vector to_internal(const Problem& problem, const Eigen::Ref<const Vector>& user_values) {
  if (user_values.size() != problem.num_objectives())
    throw DimensionError("expected " + std::to_string(problem.num_objectives()) + " objective values");
  Vector out = user_values;
  for (int i = 0; i < problem.num_objectives(); ++i)
    if (problem.objectives[i].sense == Sense::maximize) out(i) = -out(i);
  return out;
}

Vector to_user(const Problem& problem, const Eigen::Ref<const Vector>& internal_values) {
  // Negation is an involution.
  return to_internal(problem, internal_values);
}

json problem_to_json(const Problem& problem) {
  json vars = json::array();
  for (const auto& v : problem.variables) {
    json j{{"name", v.name}, {"type", to_string(v.kind)}};
    if (v.kind == VariableKind::continuous) {
      j["lb"] = v.lower;
      j["ub"] = v.upper;
    } else if (v.kind == VariableKind::discrete) {
      j["lb"] = static_cast<std::int64_t>(v.lower);
      j["ub"] = static_cast<std::int64_t>(v.upper);
    } else if (v.kind == VariableKind::categorical) {
      j["categories"] = v.categories;
    }
    vars.push_back(std::move(j));
  }
  json cons = json::array();
  for (const auto& c : problem.constraints) {
    if (const auto* lin = std::get_if<LinearConstraint>(&c.form)) {
      cons.push_back({{"name", c.name}, {"type", "linear"}, {"coefficients", lin->coefficients}, {"offset", lin->offset}});
    } else {
      const auto& bb = std::get<BlackboxConstraint>(c.form);
      cons.push_back({{"name", c.name}, {"type", "blackbox"}, {"program", bb.program},
                      {"timeout_ms", bb.timeout.count()}});
    }
  }
  json objs = json::array();
  for (const auto& o : problem.objectives) objs.push_back({{"name", o.name}, {"sense", to_string(o.sense)}});
  return {{"variables", vars}, {"constraints", cons}, {"objectives", objs}};
}

Problem problem_from_json(const json& doc) {
  Problem p;
  std::vector<std::string> errors;
  if (!doc.is_object()) throw ValidationError("problem document must be an object");
  try {
    for (const auto& j : doc.at("variables")) {
      VariableSpec v;
      v.name = j.at("name").get<std::string>();
      v.kind = parse_kind(j.at("type").get<std::string>());
      if (v.kind == VariableKind::continuous || v.kind == VariableKind::discrete) {
        v.lower = j.at("lb").get<double>();
        v.upper = j.at("ub").get<double>();
      } else {
        v.lower = 0.0;
        v.upper = 1.0;
      }
      if (j.contains("categories")) v.categories = j.at("categories").get<std::vector<std::string>>();
      p.variables.push_back(std::move(v));
    }
    if (doc.contains("constraints")) {
      for (const auto& j : doc.at("constraints")) {
        ConstraintSpec c;
        c.name = j.at("name").get<std::string>();
        const auto type = j.at("type").get<std::string>();
        if (type == "linear") {
          if (j.contains("terms")) {
            // User-unit form; converted once the variables are known.
            c.form = LinearConstraint{};
          } else {
            c.form = LinearConstraint{j.at("coefficients").get<std::vector<double>>(), j.value("offset", 0.0)};
          }
        } else if (type == "blackbox") {
          c.form = BlackboxConstraint{j.at("program").get<std::string>(),
                                      std::chrono::milliseconds(j.value<std::int64_t>("timeout_ms", 86'400'000))};
        } else {
          throw ValidationError("constraints." + c.name + ": unknown constraint type '" + type + "'");
        }
        p.constraints.push_back(std::move(c));
      }
    }
    for (const auto& j : doc.at("objectives"))
      p.objectives.push_back({j.at("name").get<std::string>(), parse_sense(j.value("sense", "minimize"))});

    if (doc.contains("constraints")) {
      std::size_t i = 0;
      for (const auto& j : doc.at("constraints")) {
        if (j.contains("terms"))
          p.constraints[i].form = linear_constraint_in_user_units(
              p, j.at("terms").get<std::map<std::string, double>>(), j.value("offset", 0.0));
        ++i;
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed problem document: ") + e.what());
  }
  return p;
}

json design_to_json(const Problem& problem, const Design& design) {
  json out = json::object();
  for (const auto& v : problem.variables) {
    auto it = design.values.find(v.name);
    if (it == design.values.end()) continue;
    std::visit([&](const auto& x) { out[v.name] = x; }, it->second);
  }
  return out;
}

Design design_from_json(const Problem& problem, const json& doc) {
  if (!doc.is_object()) throw ValidationError("design must be an object");
  Design d;
  for (const auto& [name, value] : doc.items()) {
    const VariableSpec* v = problem.find_variable(name);
    if (!v) throw ValidationError(name + ": unknown variable");
    switch (v->kind) {
      case VariableKind::continuous:
        if (!value.is_number()) throw ValidationError(name + ": expected a real value");
        d.values[name] = value.get<double>();
        break;
      case VariableKind::discrete:
        if (value.is_number_integer()) d.values[name] = value.get<std::int64_t>();
        else if (value.is_number() && is_integral(value.get<double>()))
          d.values[name] = static_cast<std::int64_t>(value.get<double>());
        else throw ValidationError(name + ": expected an integer value");
        break;
      case VariableKind::binary:
        if (value.is_boolean()) d.values[name] = value.get<bool>();
        else if (value.is_number_integer() && (value.get<int>() == 0 || value.get<int>() == 1))
          d.values[name] = value.get<int>() == 1;
        else throw ValidationError(name + ": expected a boolean value");
        break;
      case VariableKind::categorical:
        if (!value.is_string()) throw ValidationError(name + ": expected a category label");
        d.values[name] = value.get<std::string>();
        break;
    }
  }
  return d;
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    throw ValidationError("not a number: '" + text + "'");
  }
  return v;
}

std::string format_value(const DesignValue& value) {
  struct {
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::string& s) const { return s; }
  } fmt;
  return std::visit(fmt, value);
}

DesignValue parse_value(const VariableSpec& spec, const std::string& text) {
  switch (spec.kind) {
    case VariableKind::continuous:
      return parse_double(text);
    case VariableKind::discrete: {
      std::int64_t i = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
      if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError(spec.name + ": not an integer: '" + text + "'");
      return i;
    }
    case VariableKind::binary:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ValidationError(spec.name + ": not a boolean: '" + text + "'");
    case VariableKind::categorical:
      return text;
  }
  return text;
}

}  // namespace oed
