#pragma once

#include <oed/problem.hpp>
#include <oed/types.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace oed {

struct Individual {
  Vector encoded;     // relaxed genome in the unit box
  Vector acq_values;  // minimized
  int rank = 0;
  double crowding = 0.0;
  bool feasible = true;
  double violation = 0.0;
};

struct SolverConfig {
  int population_size = 100;
  int generations = 100;
  double crossover_prob = 0.9;
  double crossover_eta = 15.0;
  // Defaults to 1 / encoded dimension.
  std::optional<double> mutation_prob;
  double mutation_eta = 20.0;
  std::uint64_t seed = 0;
};

void validate(const SolverConfig& config);

/// Maps an encoded point to the objective values to minimize.
using AcquisitionFunction = std::function<Vector(const Eigen::Ref<const Vector>&)>;

struct SolverDiagnostics {
  int evaluations = 0;
  int non_finite = 0;
};

struct SolverResult {
  std::vector<Individual> population;  // final population, constraint-domination order
  std::vector<Individual> front;       // its feasible first front, with snapped encodings
  SolverDiagnostics diagnostics;
};

/// NSGA-II over `acquisition` in the problem's encoded unit box. Linear
/// constraints are handled by constraint domination; discrete and
/// categorical dimensions evolve relaxed and are snapped before evaluation.
/// Throws SolverError if the final population has no feasible individual.
SolverResult solve(const AcquisitionFunction& acquisition, const Problem& problem, const SolverConfig& config,
                   const std::vector<Vector>& warm_start = {});

/// Constraint-domination tournament: feasible beats infeasible, smaller
/// violation wins among infeasible, then lower rank, then larger crowding.
/// Ties go to `a`.
bool tournament_prefers(const Individual& a, const Individual& b);

/// Recomputes feasibility from the problem's linear constraints (non-finite
/// acquisition values are infeasible), assigns ranks and crowding among the
/// feasible, and orders the population feasible-first: by rank then crowding,
/// followed by infeasible individuals by ascending violation.
std::vector<Individual> feasibility_filter(std::vector<Individual> population, const Problem& problem);

/// Simulated binary crossover on the unit box.
std::pair<Vector, Vector> sbx_crossover(const Vector& a, const Vector& b, double eta, Rng& rng);
/// Polynomial mutation on the unit box; each gene mutates with `probability`.
Vector polynomial_mutation(const Vector& x, double eta, double probability, Rng& rng);

}  // namespace oed
