#include <oed/benchmarks.hpp>

#include <cmath>
#include <numbers>

namespace oed {

namespace {

Problem box_problem(int dim, int objectives) {
  Problem p;
  for (int i = 0; i < dim; ++i) p.variables.push_back({"x" + std::to_string(i + 1), VariableKind::continuous, 0.0, 1.0, {}});
  for (int j = 0; j < objectives; ++j) p.objectives.push_back({"f" + std::to_string(j + 1), Sense::minimize});
  return p;
}

Vector values(const Problem& problem, const Design& design) {
  Vector x(static_cast<Eigen::Index>(problem.variables.size()));
  for (std::size_t i = 0; i < problem.variables.size(); ++i)
    x(static_cast<Eigen::Index>(i)) = std::get<double>(design.values.at(problem.variables[i].name));
  return x;
}

double zdt_g(const Vector& x) { return 1.0 + 9.0 * x.tail(x.size() - 1).sum() / static_cast<double>(x.size() - 1); }

}  // namespace

Benchmark make_benchmark(const std::string& name, int dim) {
  if (dim < 2) throw ValidationError("benchmark dimension must be at least 2");
  Benchmark b;
  b.name = name;
  if (name == "zdt1" || name == "zdt2" || name == "zdt3") {
    b.problem = box_problem(dim, 2);
    const int variant = name.back() - '0';
    const Problem p = b.problem;
    b.evaluate = [p, variant](const Design& d) {
      const Vector x = values(p, d);
      const double g = zdt_g(x), r = x(0) / g;
      double h = 0.0;
      switch (variant) {
        case 1: h = 1.0 - std::sqrt(r); break;
        case 2: h = 1.0 - r * r; break;
        default: h = 1.0 - std::sqrt(r) - r * std::sin(10.0 * std::numbers::pi * x(0)); break;
      }
      Vector f(2);
      f << x(0), g * h;
      return f;
    };
    b.reference = Vector::Constant(2, 11.0);
  } else if (name == "dtlz2") {
    b.problem = box_problem(dim, 3);
    const Problem p = b.problem;
    b.evaluate = [p](const Design& d) {
      const Vector x = values(p, d);
      const double g = (x.tail(x.size() - 2).array() - 0.5).square().sum();
      const double a = x(0) * std::numbers::pi / 2, c = x(1) * std::numbers::pi / 2;
      Vector f(3);
      f << (1 + g) * std::cos(a) * std::cos(c), (1 + g) * std::cos(a) * std::sin(c), (1 + g) * std::sin(a);
      return f;
    };
    b.reference = Vector::Constant(3, 2.5);
  } else {
    throw NotFoundError("unknown benchmark '" + name + "'");
  }
  return b;
}

std::vector<std::string> benchmark_names() { return {"zdt1", "zdt2", "zdt3", "dtlz2"}; }

bool is_benchmark(const std::string& name) {
  for (const auto& n : benchmark_names())
    if (n == name) return true;
  return false;
}

}  // namespace oed
