#include <doctest.h>
#include <generators.hpp>

#include <oed/problem.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace oed;

namespace {

Problem two_var_problem() {
  Problem p = testing::continuous_problem(2);
  return p;
}

bool has_violation(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

Problem mixed_example() {
  Problem p;
  p.variables = {{"x", VariableKind::continuous, 0.0, 2.0, {}},
                 {"flag", VariableKind::binary, 0.0, 1.0, {}},
                 {"cat", VariableKind::categorical, 0.0, 1.0, {"A", "B"}}};
  p.objectives = {{"f1", Sense::minimize}, {"f2", Sense::minimize}};
  return p;
}

}  // namespace

TEST_CASE("validate reports invariant violations") {
  Problem reversed = two_var_problem();
  reversed.variables[0].lower = 1.0;
  reversed.variables[0].upper = 0.0;
  CHECK(has_violation(validate(reversed), "bounds reversed"));

  Problem single = two_var_problem();
  single.objectives.pop_back();
  CHECK(has_violation(validate(single), "fewer than 2 objectives"));

  CHECK(validate(two_var_problem()).empty());

  Problem dup = two_var_problem();
  dup.variables[1].name = "x0";
  CHECK(has_violation(validate(dup), "duplicate name"));

  Problem cat = mixed_example();
  cat.constraints.push_back({"c", LinearConstraint{{1.0, 0.0, 1.0, 0.0}, 0.0}});
  CHECK(has_violation(validate(cat), "categorical variable cat"));

  CHECK_THROWS_AS(require_valid(single), ValidationError);
}

TEST_CASE("encode follows the normalization and one-hot rules") {
  Problem p;
  p.variables = {{"x", VariableKind::continuous, 0.0, 10.0, {}}};
  p.objectives = {{"a", Sense::minimize}, {"b", Sense::minimize}};
  Design d;
  d.values["x"] = 5.0;
  CHECK(encode(p, d)(0) == doctest::Approx(0.5));

  Problem c;
  c.variables = {{"k", VariableKind::categorical, 0, 1, {"A", "B", "C"}}};
  Design b;
  b.values["k"] = std::string("B");
  const Vector e = encode(c, b);
  CHECK(e.size() == 3);
  CHECK(e(0) == 0.0);
  CHECK(e(1) == 1.0);
  CHECK(e(2) == 0.0);

  Design outside;
  outside.values["x"] = 11.0;
  try {
    encode(p, outside);
    FAIL("expected EncodingError");
  } catch (const EncodingError& err) {
    CHECK(std::string(err.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("mixed encoding example") {
  const Problem p = mixed_example();
  Design d;
  d.values["x"] = 2.0;
  d.values["flag"] = true;
  d.values["cat"] = std::string("A");
  const Vector e = encode(p, d);
  // x: (2-0)/(2-0) = 1; binary true = 1; one-hot A over {A,B} = (1,0).
  REQUIRE(e.size() == 4);
  CHECK(e(0) == 1.0);
  CHECK(e(1) == 1.0);
  CHECK(e(2) == 1.0);
  CHECK(e(3) == 0.0);
  CHECK(decode(p, e) == d);
}

TEST_CASE("decode snaps and rejects wrong lengths") {
  Problem p;
  p.variables = {{"x", VariableKind::continuous, 0.0, 10.0, {}}};
  p.objectives = {{"a", Sense::minimize}, {"b", Sense::minimize}};
  CHECK(std::get<double>(decode(p, Vector::Constant(1, 0.5)).values.at("x")) == doctest::Approx(5.0));
  CHECK_THROWS_AS(decode(p, Vector::Zero(2)), DimensionError);

  Problem c;
  c.variables = {{"k", VariableKind::categorical, 0, 1, {"A", "B"}}};
  Vector block(2);
  block << 0.2, 0.9;
  CHECK(std::get<std::string>(decode(c, block).values.at("k")) == "B");
  block << 0.5, 0.5;
  CHECK(std::get<std::string>(decode(c, block).values.at("k")) == "A");

  Problem b;
  b.variables = {{"flag", VariableKind::binary, 0, 1, {}}};
  CHECK(std::get<bool>(decode(b, Vector::Constant(1, 0.49)).values.at("flag")) == false);
  CHECK(std::get<bool>(decode(b, Vector::Constant(1, 0.5)).values.at("flag")) == true);

  Problem i;
  i.variables = {{"n", VariableKind::discrete, 0, 4, {}}};
  CHECK(std::get<std::int64_t>(decode(i, Vector::Constant(1, 0.6)).values.at("n")) == 2);
}

TEST_CASE("round trip over randomized mixed problems") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Problem p = testing::random_mixed_problem(rng);
    REQUIRE(validate(p).empty());
    int expected = 0;
    for (const auto& v : p.variables) expected += v.kind == VariableKind::categorical ? int(v.categories.size()) : 1;
    CHECK(p.encoded_dim() == expected);
    const Design d = testing::random_design(p, rng);
    const Vector e = encode(p, d);
    CHECK(e.size() == expected);
    CHECK((e.array() >= 0.0).all());
    CHECK((e.array() <= 1.0).all());
    const Design back = decode(p, e);
    for (const auto& v : p.variables) {
      if (v.kind == VariableKind::continuous)
        CHECK(std::get<double>(back.values.at(v.name)) ==
              doctest::Approx(std::get<double>(d.values.at(v.name))).epsilon(1e-12));
      else
        CHECK(back.values.at(v.name) == d.values.at(v.name));
    }
    CHECK((snap(p, e) - e).norm() < 1e-12);
  }
}

TEST_CASE("linear constraints on the encoded vector") {
  Problem p = two_var_problem();
  p.constraints.push_back({"sum", LinearConstraint{{1.0, 1.0}, -1.0}});
  Design in, out;
  in.values = {{"x0", 0.3}, {"x1", 0.3}};
  out.values = {{"x0", 0.8}, {"x1", 0.8}};
  const auto ok = check_feasible(p, in);
  CHECK(ok.feasible);
  const auto bad = check_feasible(p, out);
  CHECK_FALSE(bad.feasible);
  CHECK(bad.constraints.at(0).violation == doctest::Approx(0.6));
  CHECK(check_feasible(two_var_problem(), in).feasible);
}

TEST_CASE("user-unit constraints convert to encoded coefficients") {
  Problem p;
  p.variables = {{"x", VariableKind::continuous, 1.0, 3.0, {}}, {"y", VariableKind::discrete, 0, 10, {}}};
  p.objectives = {{"a", Sense::minimize}, {"b", Sense::minimize}};
  // 2x + y - 5 <= 0 in user units.
  const LinearConstraint c = linear_constraint_in_user_units(p, {{"x", 2.0}, {"y", 1.0}}, -5.0);
  p.constraints.push_back({"c", c});
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Design d = testing::random_design(p, rng);
    const double x = std::get<double>(d.values.at("x"));
    const double y = static_cast<double>(std::get<std::int64_t>(d.values.at("y")));
    const double g_user = 2 * x + y - 5;
    const Vector e = encode(p, d);
    const double g_enc = 2.0 * 2.0 * e(0) + 10.0 * e(1) + c.offset;
    CHECK(g_enc == doctest::Approx(g_user));
    CHECK(check_feasible(p, d).feasible == (g_user <= 1e-12));
  }
  Problem cat = mixed_example();
  CHECK_THROWS_AS(linear_constraint_in_user_units(cat, {{"cat", 1.0}}, 0.0), ValidationError);
}

TEST_CASE("blackbox checker failures are never silently feasible") {
  Problem p = two_var_problem();
  p.constraints.push_back({"bb", BlackboxConstraint{"/bin/false", std::chrono::seconds(5)}});
  Design d;
  d.values = {{"x0", 0.1}, {"x1", 0.2}};
  CHECK_THROWS_AS(check_feasible(p, d), ConstraintEvaluationError);
  auto reject = [](const BlackboxConstraint&, const Design&) { return false; };
  CHECK_FALSE(check_feasible(p, d, reject).feasible);
  auto fail = [](const BlackboxConstraint&, const Design&) -> bool { throw ConstraintEvaluationError("boom"); };
  CHECK_THROWS_AS(check_feasible(p, d, fail), ConstraintEvaluationError);
}

TEST_CASE("blackbox constraint program contract") {
  const auto script = std::filesystem::temp_directory_path() / "oed_test_constraint.sh";
  {
    std::ofstream f(script);
    f << "#!/bin/sh\ngrep -q '\"x0\":0.1' \"$1\" && echo '{\"feasible\": true}' || echo '{\"feasible\": false}'\n";
  }
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  Problem p = two_var_problem();
  p.constraints.push_back({"bb", BlackboxConstraint{script.string(), std::chrono::seconds(5)}});
  Design d;
  d.values = {{"x0", 0.1}, {"x1", 0.2}};
  CHECK(check_feasible(p, d).feasible);
  d.values["x0"] = 0.4;
  CHECK_FALSE(check_feasible(p, d).feasible);
  std::filesystem::remove(script);
}

TEST_CASE("objective sense is converted exactly once at the boundary") {
  Problem p = two_var_problem();
  p.objectives[1].sense = Sense::maximize;
  Vector y(2);
  y << 1.5, 2.5;
  const Vector internal = to_internal(p, y);
  CHECK(internal(0) == 1.5);
  CHECK(internal(1) == -2.5);
  CHECK(to_user(p, internal) == y);
}

TEST_CASE("problem and design documents round trip") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    Problem p = testing::random_mixed_problem(rng);
    std::vector<double> coef(static_cast<std::size_t>(p.encoded_dim()), 0.0);
    coef[0] = 1.0;
    p.constraints.push_back({"lin", LinearConstraint{coef, -0.5}});
    const auto doc = nlohmann::json::parse(problem_to_json(p).dump());
    const Problem q = problem_from_json(doc);
    CHECK(problem_to_json(q) == problem_to_json(p));
    const Design d = testing::random_design(p, rng);
    CHECK(design_from_json(p, nlohmann::json::parse(design_to_json(p, d).dump())) == d);
  }
  CHECK_THROWS_AS(problem_from_json(nlohmann::json::parse(R"({"variables": 3})")), ValidationError);
  const auto terms = nlohmann::json::parse(R"({
    "variables": [{"name": "x", "type": "continuous", "lb": 0, "ub": 4}, {"name": "y", "type": "continuous", "lb": 0, "ub": 4}],
    "constraints": [{"name": "c", "type": "linear", "terms": {"x": 1, "y": 1}, "offset": -4}],
    "objectives": [{"name": "f1"}, {"name": "f2", "sense": "maximize"}]})");
  const Problem t = problem_from_json(terms);
  const auto& lin = std::get<LinearConstraint>(t.constraints[0].form);
  CHECK(lin.coefficients[0] == 4.0);
  CHECK(lin.coefficients[1] == 4.0);
  CHECK(lin.offset == -4.0);
  CHECK(t.objectives[1].sense == Sense::maximize);
}

TEST_CASE("value text formatting round trips") {
  VariableSpec real{"x", VariableKind::continuous, 0, 1, {}};
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789}) CHECK(std::get<double>(parse_value(real, format_value(v))) == v);
  VariableSpec flag{"b", VariableKind::binary, 0, 1, {}};
  CHECK(std::get<bool>(parse_value(flag, "true")));
  CHECK_THROWS_AS(parse_value(flag, "maybe"), ValidationError);
}
