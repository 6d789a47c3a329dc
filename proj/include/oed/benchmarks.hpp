#pragma once

#include <oed/problem.hpp>

#include <functional>
#include <string>
#include <vector>

namespace oed {

/// Synthetic test problems with closed-form objectives.
struct Benchmark {
  std::string name;
  Problem problem;
  std::function<Vector(const Design&)> evaluate;  // user units
  Vector reference;                                // for reporting hypervolume
};

/// zdt1, zdt2, zdt3 (d variables, default 6) and dtlz2 (3 objectives).
Benchmark make_benchmark(const std::string& name, int dim = 6);
std::vector<std::string> benchmark_names();
bool is_benchmark(const std::string& name);

}  // namespace oed
