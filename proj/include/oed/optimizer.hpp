#pragma once

#include <oed/acquisition.hpp>
#include <oed/problem.hpp>
#include <oed/solver.hpp>
#include <oed/surrogate.hpp>

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oed {

enum class Preset { parego, tsemo_style, usemo_style, custom, random };
enum class EvalMode { sequential, sync_batch, async_batch };
enum class SelectionKind { hypervolume_improvement, uncertainty, random, incumbent };

std::string to_string(Preset preset);
std::string to_string(EvalMode mode);
std::string to_string(SelectionKind kind);
Preset parse_preset(const std::string& text);
EvalMode parse_eval_mode(const std::string& text);
SelectionKind parse_selection_kind(const std::string& text);

struct SelectionSpec {
  SelectionKind kind = SelectionKind::hypervolume_improvement;
  std::uint64_t seed = 0;  // random kind
};

struct RunConfig {
  Preset preset = Preset::parego;
  // Component overrides; a preset fills whatever is left unset.
  std::optional<AcquisitionSpec> acquisition;
  std::optional<SelectionSpec> selection;
  std::optional<bool> scalarize;  // custom preset: ParEGO-style scalarization
  SolverConfig solver;
  FitOptions surrogate;
  double rho = 0.05;

  int batch_size = 1;
  EvalMode eval_mode = EvalMode::sequential;
  int budget = 20;
  int n_init = 10;
  std::uint64_t seed = 0;

  bool failures_consume_budget = true;
  double async_min_interval = 0.0;  // seconds between async refits
};

/// Violations of the RunConfig invariants.
std::vector<std::string> validate(const RunConfig& config);

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& doc);

/// The four pipeline stages a configuration resolves to.
struct Pipeline {
  std::string surrogate = "gp";
  AcquisitionSpec acquisition;
  bool scalarized = false;
  std::string solver = "nsga2";
  SelectionSpec selection;
};

Pipeline resolve_pipeline(const RunConfig& config);

/// Latin hypercube sample in the encoded space, decoded. Rows violating a
/// linear constraint are replaced from fresh samples, up to 100x
/// oversampling; then InfeasibleSpaceError.
std::vector<Design> initial_designs(const Problem& problem, int n_init, std::uint64_t seed);

struct Observation {
  Design design;
  Vector objectives;  // user senses and units
};

struct OptimizerState {
  std::vector<Observation> evaluated;
  // Designs that exist but have no result (pending, in evaluation, failed);
  // suggestions never repeat these or the evaluated ones.
  std::vector<Design> known;
};

enum class SuggestionSource { initial, suggested };

struct SuggestionBatch {
  std::vector<Design> designs;
  std::vector<std::vector<Posterior>> predicted;  // per design, per objective, user units
  std::vector<double> rationale;                  // selection score per design
  std::vector<bool> unverified;                   // blackbox constraints not yet checked
  bool shortfall = false;
  SuggestionSource source = SuggestionSource::suggested;
  std::vector<GaussianProcess> models;  // per objective, internal (minimized) units
  Pipeline pipeline;
};

/// Candidate set handed to a selection strategy (internal units).
struct Candidates {
  Matrix encoded;
  Matrix means;
  Matrix uncertainty;   // posterior variance / target variance, per objective
  Vector acquisition;   // incumbent kind: smaller is better
};

Candidates make_candidates(const std::vector<GaussianProcess>& models, const Matrix& encoded);

struct Selection {
  std::vector<int> chosen;
  std::vector<double> scores;
  bool shortfall = false;
};

/// Picks `count` rows of `candidates`:
///  hypervolume_improvement  greedy argmax of the hypervolume gain of the
///                           candidate means over evaluated_front + chosen
///  uncertainty              top summed standardized posterior variance
///  random                   seeded uniform without replacement
///  incumbent                smallest acquisition value
Selection select(const Candidates& candidates, const SelectionSpec& spec, int count, const Matrix& evaluated_front,
                 const Vector& reference);

/// One suggestion round: fit surrogates, build the preset's acquisition,
/// solve, select. Falls back to initial designs until `n_init` designs
/// exist or while fewer than two results are available.
SuggestionBatch suggest(const Problem& problem, const OptimizerState& state, const RunConfig& config, int count,
                        int iteration);

/// Fits one model per objective on evaluated data (internal units).
std::vector<GaussianProcess> fit_models(const Problem& problem, const std::vector<Observation>& evaluated,
                                        const FitOptions& options, std::uint64_t seed);

/// Posterior per objective at `design`, in user units and senses.
std::vector<Posterior> predict_design(const std::vector<GaussianProcess>& models, const Problem& problem,
                                      const Design& design);

/// Internal-convention objective matrix of the evaluated observations.
Matrix internal_objectives(const Problem& problem, const std::vector<Observation>& evaluated);

}  // namespace oed
