#include <oed/optimizer.hpp>
#include <oed/pareto.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>

namespace oed {

using nlohmann::json;

namespace {

constexpr double kDuplicateTolerance = 1e-9;
constexpr int kFallbackCandidates = 1000;

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, const char* what) {
  for (Enum v : values)
    if (to_string(v) == text) return v;
  throw ValidationError(std::string("unknown ") + what + " '" + text + "'");
}

bool near_any(const Vector& x, const std::vector<Vector>& pool) {
  return std::any_of(pool.begin(), pool.end(),
                     [&](const Vector& p) { return (p - x).norm() <= kDuplicateTolerance; });
}

Matrix stack(const std::vector<Vector>& rows, Eigen::Index cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

// Uniform points in the unit box, snapped, linear-feasible, and not near `avoid`.
std::vector<Vector> random_feasible(const Problem& problem, int count, std::uint64_t seed, std::vector<Vector> avoid) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int d = problem.encoded_dim();
  std::vector<Vector> out;
  for (int attempt = 0; attempt < 100 * std::max(count, 1) && static_cast<int>(out.size()) < count; ++attempt) {
    Vector x(d);
    for (int j = 0; j < d; ++j) x(j) = u(rng);
    x = snap(problem, x);
    if (linear_violation(problem, x) > 0.0 || near_any(x, avoid)) continue;
    avoid.push_back(x);
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

std::string to_string(Preset preset) {
  switch (preset) {
    case Preset::parego: return "parego";
    case Preset::tsemo_style: return "tsemo_style";
    case Preset::usemo_style: return "usemo_style";
    case Preset::custom: return "custom";
    case Preset::random: return "random";
  }
  return "?";
}

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::sequential: return "sequential";
    case EvalMode::sync_batch: return "sync_batch";
    case EvalMode::async_batch: return "async_batch";
  }
  return "?";
}

std::string to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::hypervolume_improvement: return "hypervolume_improvement";
    case SelectionKind::uncertainty: return "uncertainty";
    case SelectionKind::random: return "random";
    case SelectionKind::incumbent: return "incumbent";
  }
  return "?";
}

Preset parse_preset(const std::string& text) {
  return parse_enum(text, std::array{Preset::parego, Preset::tsemo_style, Preset::usemo_style, Preset::custom,
                                     Preset::random},
                    "preset");
}

EvalMode parse_eval_mode(const std::string& text) {
  if (text == "seq") return EvalMode::sequential;
  if (text == "sync") return EvalMode::sync_batch;
  if (text == "async") return EvalMode::async_batch;
  return parse_enum(text, std::array{EvalMode::sequential, EvalMode::sync_batch, EvalMode::async_batch},
                    "evaluation mode");
}

SelectionKind parse_selection_kind(const std::string& text) {
  return parse_enum(text,
                    std::array{SelectionKind::hypervolume_improvement, SelectionKind::uncertainty,
                               SelectionKind::random, SelectionKind::incumbent},
                    "selection kind");
}

std::vector<std::string> validate(const RunConfig& config) {
  std::vector<std::string> v;
  if (config.batch_size < 1) v.push_back("batch_size: must be at least 1");
  if (config.eval_mode == EvalMode::sequential && config.batch_size != 1)
    v.push_back("batch_size: sequential mode requires batch_size 1");
  if (config.budget < 0) v.push_back("budget: must be non-negative");
  if (config.n_init < 2) v.push_back("n_init: must be at least 2");
  if (!(config.rho > 0)) v.push_back("rho: must be positive");
  if (config.acquisition && config.acquisition->kind == AcquisitionKind::upper_confidence_bound &&
      !(config.acquisition->ucb_beta > 0))
    v.push_back("acquisition.ucb_beta: must be positive");
  try {
    validate(config.solver);
  } catch (const ValidationError& e) {
    for (const auto& s : e.violations()) v.push_back("solver: " + s);
  }
  return v;
}

json run_config_to_json(const RunConfig& c) {
  json j{{"preset", to_string(c.preset)},
         {"batch_size", c.batch_size},
         {"eval_mode", to_string(c.eval_mode)},
         {"budget", c.budget},
         {"n_init", c.n_init},
         {"seed", c.seed},
         {"rho", c.rho},
         {"failures_consume_budget", c.failures_consume_budget},
         {"async_min_interval", c.async_min_interval}};
  if (c.acquisition)
    j["acquisition"] = {{"kind", to_string(c.acquisition->kind)},
                        {"ucb_beta", c.acquisition->ucb_beta},
                        {"ts_seed", c.acquisition->ts_seed}};
  if (c.selection) j["selection"] = {{"kind", to_string(c.selection->kind)}, {"seed", c.selection->seed}};
  if (c.scalarize) j["scalarize"] = *c.scalarize;
  j["solver"] = {{"population_size", c.solver.population_size},
                 {"generations", c.solver.generations},
                 {"crossover_prob", c.solver.crossover_prob},
                 {"crossover_eta", c.solver.crossover_eta},
                 {"mutation_eta", c.solver.mutation_eta}};
  if (c.solver.mutation_prob) j["solver"]["mutation_prob"] = *c.solver.mutation_prob;
  j["surrogate"] = {{"restarts", c.surrogate.restarts}, {"max_iterations", c.surrogate.max_iterations}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ValidationError("run config must be an object");
    c.preset = parse_preset(j.value("preset", std::string("parego")));
    c.batch_size = j.value("batch_size", 1);
    c.eval_mode = parse_eval_mode(j.value("eval_mode", std::string("sequential")));
    c.budget = j.value("budget", 20);
    c.n_init = j.value("n_init", 10);
    c.seed = j.value<std::uint64_t>("seed", 0);
    c.rho = j.value("rho", 0.05);
    c.failures_consume_budget = j.value("failures_consume_budget", true);
    c.async_min_interval = j.value("async_min_interval", 0.0);
    if (j.contains("acquisition")) {
      const auto& a = j.at("acquisition");
      AcquisitionSpec spec;
      spec.kind = parse_acquisition_kind(a.at("kind").get<std::string>());
      spec.ucb_beta = a.value("ucb_beta", 2.0);
      spec.ts_seed = a.value<std::uint64_t>("ts_seed", 0);
      c.acquisition = spec;
    }
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      c.selection = SelectionSpec{parse_selection_kind(s.at("kind").get<std::string>()), s.value<std::uint64_t>("seed", 0)};
    }
    if (j.contains("scalarize")) c.scalarize = j.at("scalarize").get<bool>();
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      c.solver.population_size = s.value("population_size", c.solver.population_size);
      c.solver.generations = s.value("generations", c.solver.generations);
      c.solver.crossover_prob = s.value("crossover_prob", c.solver.crossover_prob);
      c.solver.crossover_eta = s.value("crossover_eta", c.solver.crossover_eta);
      c.solver.mutation_eta = s.value("mutation_eta", c.solver.mutation_eta);
      if (s.contains("mutation_prob")) c.solver.mutation_prob = s.at("mutation_prob").get<double>();
    }
    if (j.contains("surrogate")) {
      const auto& s = j.at("surrogate");
      c.surrogate.restarts = s.value("restarts", c.surrogate.restarts);
      c.surrogate.max_iterations = s.value("max_iterations", c.surrogate.max_iterations);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

Pipeline resolve_pipeline(const RunConfig& config) {
  Pipeline p;
  switch (config.preset) {
    case Preset::parego:
      p.acquisition.kind = AcquisitionKind::expected_improvement;
      p.scalarized = true;
      p.selection.kind = SelectionKind::incumbent;
      break;
    case Preset::tsemo_style:
      p.acquisition.kind = AcquisitionKind::thompson_sampling;
      p.selection.kind = SelectionKind::hypervolume_improvement;
      break;
    case Preset::usemo_style:
      p.acquisition.kind = AcquisitionKind::upper_confidence_bound;
      p.selection.kind = SelectionKind::uncertainty;
      break;
    case Preset::custom:
      p.acquisition.kind = AcquisitionKind::expected_improvement;
      p.scalarized = config.scalarize.value_or(false);
      p.selection.kind = p.scalarized ? SelectionKind::incumbent : SelectionKind::hypervolume_improvement;
      break;
    case Preset::random:
      p.surrogate = "none";
      p.solver = "none";
      p.selection.kind = SelectionKind::random;
      break;
  }
  if (config.preset == Preset::custom || config.preset == Preset::random) {
    if (config.acquisition) p.acquisition = *config.acquisition;
    if (config.selection) p.selection = *config.selection;
  } else {
    // Presets keep their component kinds; parameters may still be tuned.
    if (config.acquisition) {
      p.acquisition.ucb_beta = config.acquisition->ucb_beta;
      p.acquisition.ts_seed = config.acquisition->ts_seed;
    }
    if (config.selection && config.selection->kind == p.selection.kind) p.selection.seed = config.selection->seed;
  }
  if (p.acquisition.kind == AcquisitionKind::upper_confidence_bound && !config.acquisition) p.acquisition.ucb_beta = 2.0;
  return p;
}

std::vector<Design> initial_designs(const Problem& problem, int n_init, std::uint64_t seed) {
  if (n_init < 2) throw PreconditionError("initial_designs: n_init must be at least 2");
  const int d = problem.encoded_dim();
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Design> out;
  int generated = 0;
  while (static_cast<int>(out.size()) < n_init && generated < 100 * n_init) {
    Matrix sample(n_init, d);
    for (int j = 0; j < d; ++j) {
      std::vector<int> strata(static_cast<std::size_t>(n_init));
      std::iota(strata.begin(), strata.end(), 0);
      std::shuffle(strata.begin(), strata.end(), rng);
      for (int i = 0; i < n_init; ++i) sample(i, j) = (strata[static_cast<std::size_t>(i)] + u(rng)) / n_init;
    }
    generated += n_init;
    for (int i = 0; i < n_init && static_cast<int>(out.size()) < n_init; ++i) {
      const Vector x = sample.row(i).transpose();
      if (linear_violation(problem, snap(problem, x)) > 0.0) continue;
      out.push_back(decode(problem, x));
    }
  }
  if (static_cast<int>(out.size()) < n_init)
    throw InfeasibleSpaceError("initial_designs: could not find " + std::to_string(n_init) +
                               " feasible designs within 100x oversampling");
  return out;
}

Matrix internal_objectives(const Problem& problem, const std::vector<Observation>& evaluated) {
  Matrix y(static_cast<Eigen::Index>(evaluated.size()), problem.num_objectives());
  for (std::size_t i = 0; i < evaluated.size(); ++i)
    y.row(static_cast<Eigen::Index>(i)) = to_internal(problem, evaluated[i].objectives).transpose();
  return y;
}

std::vector<GaussianProcess> fit_models(const Problem& problem, const std::vector<Observation>& evaluated,
                                        const FitOptions& options, std::uint64_t seed) {
  Matrix x(static_cast<Eigen::Index>(evaluated.size()), problem.encoded_dim());
  for (std::size_t i = 0; i < evaluated.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = encode(problem, evaluated[i].design).transpose();
  const Matrix y = internal_objectives(problem, evaluated);
  std::vector<GaussianProcess> models;
  for (int j = 0; j < problem.num_objectives(); ++j) {
    try {
      models.push_back(GaussianProcess::fit(x, y.col(j), mix_seed(seed, static_cast<std::uint64_t>(j)), options));
    } catch (const ConditioningError& e) {
      throw ConditioningError(std::string(e.what()) + " (objective " + problem.objectives[j].name +
                              "; retry with the random preset to continue without a surrogate)");
    }
  }
  return models;
}

std::vector<Posterior> predict_design(const std::vector<GaussianProcess>& models, const Problem& problem,
                                      const Design& design) {
  auto violations = validate_design(problem, design);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  if (models.empty()) throw NoModelError("no fitted model yet");
  if (static_cast<int>(models.size()) != problem.num_objectives())
    throw DimensionError("predict_design: one model per objective required");
  const Vector x = encode(problem, design);
  std::vector<Posterior> out;
  for (int j = 0; j < problem.num_objectives(); ++j) {
    Posterior p = models[static_cast<std::size_t>(j)].predict(x);
    if (problem.objectives[static_cast<std::size_t>(j)].sense == Sense::maximize) p.mean = -p.mean;
    out.push_back(p);
  }
  return out;
}

Candidates make_candidates(const std::vector<GaussianProcess>& models, const Matrix& encoded) {
  Candidates c;
  c.encoded = encoded;
  const auto m = static_cast<Eigen::Index>(models.size());
  c.means.resize(encoded.rows(), m);
  c.uncertainty.resize(encoded.rows(), m);
  c.acquisition = Vector::Zero(encoded.rows());
  for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& gp = models[static_cast<std::size_t>(j)];
      const Posterior p = gp.predict(encoded.row(i).transpose());
      c.means(i, j) = p.mean;
      c.uncertainty(i, j) = p.variance / (gp.target_std() * gp.target_std());
    }
  }
  return c;
}

Selection select(const Candidates& candidates, const SelectionSpec& spec, int count, const Matrix& evaluated_front,
                 const Vector& reference) {
  const int n = static_cast<int>(candidates.encoded.rows());
  if (n == 0) throw PreconditionError("select: empty candidate set");
  Selection out;
  if (count > n) {
    out.shortfall = true;
    count = n;
  }
  auto uncertainty_sum = [&](int i) {
    return candidates.uncertainty.rows() == n ? candidates.uncertainty.row(i).sum() : 0.0;
  };

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  switch (spec.kind) {
    case SelectionKind::hypervolume_improvement: {
      const Eigen::Index m = reference.size();
      std::vector<Vector> current;
      for (Eigen::Index i = 0; i < evaluated_front.rows(); ++i)
        if ((evaluated_front.row(i).transpose().array() <= reference.array()).all())
          current.push_back(evaluated_front.row(i).transpose());
      HypervolumeOptions hv_options;
      hv_options.samples = 20'000;
      auto hv = [&](const std::vector<Vector>& pts) { return hypervolume(stack(pts, m), reference, hv_options); };
      std::vector<bool> taken(static_cast<std::size_t>(n), false);
      for (int k = 0; k < count; ++k) {
        const double base = hv(current);
        int best = -1;
        double best_gain = -1.0, best_unc = -1.0;
        for (int i = 0; i < n; ++i) {
          if (taken[static_cast<std::size_t>(i)]) continue;
          const Vector mean = candidates.means.row(i).transpose();
          double gain = 0.0;
          if ((mean.array() <= reference.array()).all()) {
            current.push_back(mean);
            gain = std::max(0.0, hv(current) - base);
            current.pop_back();
          }
          const double unc = uncertainty_sum(i);
          if (gain > best_gain || (gain == best_gain && unc > best_unc)) {
            best = i;
            best_gain = gain;
            best_unc = unc;
          }
        }
        taken[static_cast<std::size_t>(best)] = true;
        out.chosen.push_back(best);
        out.scores.push_back(best_gain);
        const Vector mean = candidates.means.row(best).transpose();
        if ((mean.array() <= reference.array()).all()) current.push_back(mean);
      }
      break;
    }
    case SelectionKind::uncertainty:
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return uncertainty_sum(a) > uncertainty_sum(b); });
      for (int k = 0; k < count; ++k) {
        out.chosen.push_back(order[static_cast<std::size_t>(k)]);
        out.scores.push_back(uncertainty_sum(order[static_cast<std::size_t>(k)]));
      }
      break;
    case SelectionKind::random: {
      Rng rng(spec.seed);
      std::shuffle(order.begin(), order.end(), rng);
      for (int k = 0; k < count; ++k) {
        out.chosen.push_back(order[static_cast<std::size_t>(k)]);
        out.scores.push_back(0.0);
      }
      break;
    }
    case SelectionKind::incumbent:
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return candidates.acquisition(a) < candidates.acquisition(b); });
      for (int k = 0; k < count; ++k) {
        out.chosen.push_back(order[static_cast<std::size_t>(k)]);
        out.scores.push_back(-candidates.acquisition(order[static_cast<std::size_t>(k)]));
      }
      break;
  }
  return out;
}

SuggestionBatch suggest(const Problem& problem, const OptimizerState& state, const RunConfig& config, int count,
                        int iteration) {
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  if (count < 1) throw PreconditionError("suggest: count must be at least 1");
  const auto iter_seed = mix_seed(config.seed, static_cast<std::uint64_t>(iteration));

  SuggestionBatch batch;
  batch.pipeline = resolve_pipeline(config);
  const bool unverified = problem.has_blackbox_constraints();

  std::vector<Vector> known;
  for (const auto& o : state.evaluated) known.push_back(encode(problem, o.design));
  for (const auto& d : state.known) known.push_back(encode(problem, d));

  auto finish = [&](const std::vector<Vector>& encoded, const std::vector<double>& scores) {
    for (std::size_t i = 0; i < encoded.size(); ++i) {
      Design d = decode(problem, encoded[i]);
      if (!batch.models.empty()) batch.predicted.push_back(predict_design(batch.models, problem, d));
      batch.designs.push_back(std::move(d));
      batch.rationale.push_back(i < scores.size() ? scores[i] : 0.0);
      batch.unverified.push_back(unverified);
    }
    if (static_cast<int>(batch.designs.size()) < count) batch.shortfall = true;
    return batch;
  };

  const int existing = static_cast<int>(known.size());
  if (existing < config.n_init) {
    batch.source = SuggestionSource::initial;
    const auto lhs = initial_designs(problem, config.n_init, mix_seed(config.seed, 0x1417));
    std::vector<Vector> chosen;
    // Remaining design points first; a larger batch is topped up at random.
    const int wanted = count;
    for (const auto& d : lhs) {
      if (static_cast<int>(chosen.size()) == wanted) break;
      const Vector x = encode(problem, d);
      if (near_any(x, known) || near_any(x, chosen)) continue;
      chosen.push_back(x);
    }
    if (static_cast<int>(chosen.size()) < wanted) {
      auto extra = random_feasible(problem, wanted - static_cast<int>(chosen.size()), iter_seed, [&] {
        auto avoid = known;
        avoid.insert(avoid.end(), chosen.begin(), chosen.end());
        return avoid;
      }());
      chosen.insert(chosen.end(), extra.begin(), extra.end());
    }
    return finish(chosen, {});
  }

  if (state.evaluated.size() < 2 || config.preset == Preset::random) {
    batch.source = state.evaluated.size() < 2 ? SuggestionSource::initial : SuggestionSource::suggested;
    return finish(random_feasible(problem, count, iter_seed, known), {});
  }

  batch.models = fit_models(problem, state.evaluated, config.surrogate, iter_seed);
  const Matrix y = internal_objectives(problem, state.evaluated);
  const Vector reference = reference_point(y);
  Matrix front(0, y.cols());
  {
    const auto idx = non_dominated_indices(y);
    front.resize(static_cast<Eigen::Index>(idx.size()), y.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) front.row(static_cast<Eigen::Index>(k)) = y.row(idx[k]);
  }

  SolverConfig solver_config = config.solver;
  solver_config.seed = mix_seed(iter_seed, 0x501);
  const Pipeline& pipe = batch.pipeline;
  const bool improvement = pipe.acquisition.kind == AcquisitionKind::expected_improvement;

  std::vector<Vector> pool;
  std::vector<double> pool_acq;
  if (pipe.scalarized) {
    // ParEGO: one fresh weight vector per iteration, EI on the scalarized data.
    const ScalarizationWeights weights =
        sample_simplex_weights(problem.num_objectives(), mix_seed(iter_seed, 0x3e1), config.rho);
    const Matrix normalized = normalize_columns(y);
    Vector scalar(y.rows());
    for (Eigen::Index i = 0; i < y.rows(); ++i) scalar(i) = tchebycheff(normalized.row(i).transpose(), weights);
    Matrix x(y.rows(), problem.encoded_dim());
    for (std::size_t i = 0; i < state.evaluated.size(); ++i)
      x.row(static_cast<Eigen::Index>(i)) = known[i].transpose();
    std::vector<GaussianProcess> scalar_model{GaussianProcess::fit(x, scalar, mix_seed(iter_seed, 0x5ca1), config.surrogate)};
    AcquisitionContext ctx;
    ctx.incumbents = {scalar.minCoeff()};
    if (pipe.acquisition.kind == AcquisitionKind::thompson_sampling)
      ctx = thompson_context(scalar_model, mix_seed(iter_seed, pipe.acquisition.ts_seed));
    auto acq = [&](const Eigen::Ref<const Vector>& point) -> Vector {
      Vector v = evaluate_acquisition(pipe.acquisition, scalar_model, point, ctx);
      return improvement ? Vector(-v) : v;
    };
    SolverResult result = solve(acq, problem, solver_config);
    for (const auto& ind : result.population) {
      if (!ind.feasible) continue;
      pool.push_back(snap(problem, ind.encoded));
      pool_acq.push_back(ind.acq_values(0));
    }
  } else {
    AcquisitionContext ctx;
    if (improvement) {
      const Vector best = y.colwise().minCoeff().transpose();
      ctx.incumbents.assign(best.data(), best.data() + best.size());
    }
    if (pipe.acquisition.kind == AcquisitionKind::thompson_sampling)
      ctx = thompson_context(batch.models, mix_seed(iter_seed, pipe.acquisition.ts_seed));
    auto acq = [&](const Eigen::Ref<const Vector>& point) -> Vector {
      Vector v = evaluate_acquisition(pipe.acquisition, batch.models, point, ctx);
      return improvement ? Vector(-v) : v;
    };
    SolverResult result = solve(acq, problem, solver_config);
    for (const auto& ind : result.front) {
      pool.push_back(ind.encoded);
      pool_acq.push_back(ind.acq_values.sum());
    }
    // A front smaller than the batch is topped up from the rest of the population.
    for (const auto& ind : result.population) {
      if (static_cast<int>(pool.size()) >= count + static_cast<int>(result.front.size())) break;
      if (!ind.feasible || ind.rank == 0) continue;
      pool.push_back(snap(problem, ind.encoded));
      pool_acq.push_back(ind.acq_values.sum());
    }
  }

  // Drop candidates that repeat known designs or each other.
  std::vector<Vector> unique;
  std::vector<double> unique_acq;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (near_any(pool[i], known) || near_any(pool[i], unique)) continue;
    unique.push_back(pool[i]);
    unique_acq.push_back(pool_acq[i]);
  }

  if (unique.empty()) {
    // Maximum-variance fallback over random feasible candidates.
    auto fallback = random_feasible(problem, kFallbackCandidates, mix_seed(iter_seed, 0xfa11), known);
    if (fallback.empty()) throw SolverError("suggest: no feasible candidate distinct from known designs");
    const Candidates c = make_candidates(batch.models, stack(fallback, problem.encoded_dim()));
    const Selection s = select(c, {SelectionKind::uncertainty, 0}, count, front, reference);
    std::vector<Vector> chosen;
    for (int i : s.chosen) chosen.push_back(fallback[static_cast<std::size_t>(i)]);
    return finish(chosen, s.scores);
  }

  if (static_cast<int>(unique.size()) < count) {
    auto avoid = known;
    avoid.insert(avoid.end(), unique.begin(), unique.end());
    const auto extra = random_feasible(problem, count - static_cast<int>(unique.size()), mix_seed(iter_seed, 0xfa12), avoid);
    unique.insert(unique.end(), extra.begin(), extra.end());
    unique_acq.resize(unique.size(), std::numeric_limits<double>::infinity());
  }

  Candidates c = make_candidates(batch.models, stack(unique, problem.encoded_dim()));
  c.acquisition = Eigen::Map<const Vector>(unique_acq.data(), static_cast<Eigen::Index>(unique_acq.size()));
  SelectionSpec spec = pipe.selection;
  if (spec.kind == SelectionKind::random) spec.seed = mix_seed(iter_seed, spec.seed);
  const Selection s = select(c, spec, count, front, reference);
  std::vector<Vector> chosen;
  for (int i : s.chosen) chosen.push_back(unique[static_cast<std::size_t>(i)]);
  batch.shortfall = s.shortfall;
  return finish(chosen, s.scores);
}

}  // namespace oed
