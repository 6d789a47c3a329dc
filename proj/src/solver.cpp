#include <oed/pareto.hpp>
#include <oed/solver.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oed {

namespace {

constexpr double kNonFiniteViolation = 1e300;

bool all_continuous(const Problem& problem) {
  return std::all_of(problem.variables.begin(), problem.variables.end(),
                     [](const VariableSpec& v) { return v.kind == VariableKind::continuous; });
}

struct Evaluator {
  const AcquisitionFunction& acquisition;
  const Problem& problem;
  bool relaxed;
  SolverDiagnostics& diagnostics;

  Vector point(const Vector& genome) const { return relaxed ? genome : snap(problem, genome); }

  void operator()(Individual& ind) const {
    const Vector x = point(ind.encoded);
    ind.acq_values = acquisition(x);
    ++diagnostics.evaluations;
    ind.violation = linear_violation(problem, x);
    if (!ind.acq_values.allFinite()) {
      ++diagnostics.non_finite;
      ind.violation = kNonFiniteViolation;
    }
    ind.feasible = ind.violation <= 0.0;
  }
};

// Ranks and crowding for the feasible members; returns the constraint-domination order.
std::vector<int> order_population(std::vector<Individual>& pop) {
  std::vector<int> feasible, infeasible;
  for (int i = 0; i < static_cast<int>(pop.size()); ++i) (pop[i].feasible ? feasible : infeasible).push_back(i);

  std::vector<int> order;
  if (!feasible.empty()) {
    const Eigen::Index m = pop[feasible.front()].acq_values.size();
    Matrix values(static_cast<Eigen::Index>(feasible.size()), m);
    for (std::size_t k = 0; k < feasible.size(); ++k) values.row(static_cast<Eigen::Index>(k)) = pop[feasible[k]].acq_values.transpose();
    const FrontPartition part = non_dominated_sort(values);
    for (std::size_t r = 0; r < part.fronts.size(); ++r) {
      const auto& front = part.fronts[r];
      Matrix fv(static_cast<Eigen::Index>(front.size()), m);
      for (std::size_t k = 0; k < front.size(); ++k) fv.row(static_cast<Eigen::Index>(k)) = values.row(front[k]);
      const Vector cd = crowding_distance(fv);
      std::vector<int> members;
      for (std::size_t k = 0; k < front.size(); ++k) {
        Individual& ind = pop[feasible[front[k]]];
        ind.rank = static_cast<int>(r);
        ind.crowding = cd(static_cast<Eigen::Index>(k));
        members.push_back(feasible[front[k]]);
      }
      std::stable_sort(members.begin(), members.end(),
                       [&](int a, int b) { return pop[a].crowding > pop[b].crowding; });
      order.insert(order.end(), members.begin(), members.end());
    }
  }
  const int infeasible_rank = order.empty() ? 0 : pop[order.back()].rank + 1;
  std::stable_sort(infeasible.begin(), infeasible.end(),
                   [&](int a, int b) { return pop[a].violation < pop[b].violation; });
  for (int i : infeasible) {
    pop[i].rank = infeasible_rank;
    pop[i].crowding = 0.0;
  }
  order.insert(order.end(), infeasible.begin(), infeasible.end());
  return order;
}

std::vector<Individual> take(const std::vector<Individual>& pop, const std::vector<int>& order, std::size_t count) {
  std::vector<Individual> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count && k < order.size(); ++k) out.push_back(pop[order[k]]);
  return out;
}

}  // namespace

void validate(const SolverConfig& config) {
  std::vector<std::string> v;
  if (config.population_size < 2 || config.population_size % 2 != 0) v.push_back("population_size must be even and >= 2");
  if (config.generations < 1) v.push_back("generations must be positive");
  if (config.crossover_prob < 0 || config.crossover_prob > 1) v.push_back("crossover_prob must lie in [0,1]");
  if (!(config.crossover_eta > 0)) v.push_back("crossover_eta must be positive");
  if (config.mutation_prob && (*config.mutation_prob < 0 || *config.mutation_prob > 1))
    v.push_back("mutation_prob must lie in [0,1]");
  if (!(config.mutation_eta > 0)) v.push_back("mutation_eta must be positive");
  if (!v.empty()) throw ValidationError(std::move(v));
}

bool tournament_prefers(const Individual& a, const Individual& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (!a.feasible) return a.violation <= b.violation;
  if (a.rank != b.rank) return a.rank < b.rank;
  return a.crowding >= b.crowding;
}

std::vector<Individual> feasibility_filter(std::vector<Individual> population, const Problem& problem) {
  for (auto& ind : population) {
    ind.violation = linear_violation(problem, ind.encoded);
    if (ind.acq_values.size() == 0 || !ind.acq_values.allFinite()) ind.violation = kNonFiniteViolation;
    ind.feasible = ind.violation <= 0.0;
  }
  const auto order = order_population(population);
  return take(population, order, population.size());
}

std::pair<Vector, Vector> sbx_crossover(const Vector& a, const Vector& b, double eta, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector c1 = a, c2 = b;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (u(rng) > 0.5) continue;
    if (std::abs(a(i) - b(i)) <= 1e-14) continue;
    const double y1 = std::min(a(i), b(i)), y2 = std::max(a(i), b(i));
    const double r = u(rng);
    auto betaq = [&](double beta) {
      const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
      return r <= 1.0 / alpha ? std::pow(r * alpha, 1.0 / (eta + 1.0))
                              : std::pow(1.0 / (2.0 - r * alpha), 1.0 / (eta + 1.0));
    };
    double v1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * y1 / (y2 - y1)) * (y2 - y1));
    double v2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (1.0 - y2) / (y2 - y1)) * (y2 - y1));
    v1 = std::clamp(v1, 0.0, 1.0);
    v2 = std::clamp(v2, 0.0, 1.0);
    if (u(rng) <= 0.5) std::swap(v1, v2);
    c1(i) = v1;
    c2(i) = v2;
  }
  return {c1, c2};
}

Vector polynomial_mutation(const Vector& x, double eta, double probability, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector y = x;
  const double power = 1.0 / (eta + 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (u(rng) > probability) continue;
    const double v = y(i);
    const double d1 = v, d2 = 1.0 - v;
    const double r = u(rng);
    double dq;
    if (r < 0.5) {
      const double val = 2.0 * r + (1.0 - 2.0 * r) * std::pow(1.0 - d1, eta + 1.0);
      dq = std::pow(val, power) - 1.0;
    } else {
      const double val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(1.0 - d2, eta + 1.0);
      dq = 1.0 - std::pow(val, power);
    }
    y(i) = std::clamp(v + dq, 0.0, 1.0);
  }
  return y;
}

SolverResult solve(const AcquisitionFunction& acquisition, const Problem& problem, const SolverConfig& config,
                   const std::vector<Vector>& warm_start) {
  validate(config);
  const int d = problem.encoded_dim();
  const int n = config.population_size;
  const double mutation_prob = config.mutation_prob.value_or(1.0 / std::max(1, d));

  SolverResult result;
  Evaluator evaluate{acquisition, problem, all_continuous(problem), result.diagnostics};
  Rng rng(config.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<Individual> pop;
  pop.reserve(static_cast<std::size_t>(2 * n));
  for (const auto& w : warm_start) {
    if (static_cast<int>(pop.size()) == n) break;
    if (w.size() != d) throw DimensionError("solve: warm-start individual has the wrong dimension");
    pop.push_back({w.cwiseMax(0.0).cwiseMin(1.0), {}, 0, 0.0, true, 0.0});
  }
  while (static_cast<int>(pop.size()) < n) {
    Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = u(rng);
    pop.push_back({x, {}, 0, 0.0, true, 0.0});
  }
  for (auto& ind : pop) evaluate(ind);
  order_population(pop);

  std::uniform_int_distribution<int> pick(0, n - 1);
  auto tournament = [&]() -> const Individual& {
    const Individual& a = pop[pick(rng)];
    const Individual& b = pop[pick(rng)];
    return tournament_prefers(a, b) ? a : b;
  };

  for (int gen = 0; gen < config.generations; ++gen) {
    std::vector<Individual> merged = pop;
    while (static_cast<int>(merged.size()) < 2 * n) {
      const Individual& p1 = tournament();
      const Individual& p2 = tournament();
      Vector c1 = p1.encoded, c2 = p2.encoded;
      if (u(rng) <= config.crossover_prob) std::tie(c1, c2) = sbx_crossover(c1, c2, config.crossover_eta, rng);
      c1 = polynomial_mutation(c1, config.mutation_eta, mutation_prob, rng);
      c2 = polynomial_mutation(c2, config.mutation_eta, mutation_prob, rng);
      for (Vector* c : {&c1, &c2}) {
        Individual child{*c, {}, 0, 0.0, true, 0.0};
        evaluate(child);
        merged.push_back(std::move(child));
      }
    }
    const auto order = order_population(merged);
    // Environmental selection: whole fronts first; the order within a front is by crowding.
    pop = take(merged, order, static_cast<std::size_t>(n));
    order_population(pop);
  }

  const auto order = order_population(pop);
  result.population = take(pop, order, pop.size());
  for (const auto& ind : result.population) {
    if (!ind.feasible || ind.rank != 0) continue;
    Individual out = ind;
    out.encoded = evaluate.point(ind.encoded);
    result.front.push_back(std::move(out));
  }
  if (result.front.empty()) throw SolverError("solver: no feasible individual in the final population");
  return result;
}

}  // namespace oed
