#pragma once

#include <oed/error.hpp>
#include <oed/surrogate.hpp>
#include <oed/types.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace oed {

enum class AcquisitionKind { expected_improvement, upper_confidence_bound, thompson_sampling, posterior_mean };

std::string to_string(AcquisitionKind kind);
AcquisitionKind parse_acquisition_kind(const std::string& text);

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::expected_improvement;
  double ucb_beta = 2.0;         // UCB only
  std::uint64_t ts_seed = 0;     // Thompson sampling only
};

/// Augmented Tchebycheff weights: w on the simplex, rho > 0.
struct ScalarizationWeights {
  Vector w;
  double rho = 0.05;
};

template <typename Scalar>
Scalar normal_pdf(Scalar z) {
  return std::exp(Scalar(-0.5) * z * z) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar normal_cdf(Scalar z) {
  return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

/// Expected improvement below `best` (minimization).
template <typename Scalar>
Scalar expected_improvement(Scalar mean, Scalar variance, Scalar best) {
  if (!std::isfinite(mean) || !std::isfinite(variance) || !std::isfinite(best))
    throw ValidationError("expected_improvement: non-finite posterior");
  const Scalar sigma = std::sqrt(std::max(variance, Scalar(0)));
  if (sigma == Scalar(0)) return std::max(best - mean, Scalar(0));
  const Scalar z = (best - mean) / sigma;
  return std::max(sigma * (z * normal_cdf(z) + normal_pdf(z)), Scalar(0));
}

inline double expected_improvement(const Posterior& post, double best) {
  return expected_improvement(post.mean, post.variance, best);
}

/// Lower confidence bound mu - sqrt(beta) sigma; smaller is more promising.
template <typename Scalar>
Scalar ucb(Scalar mean, Scalar variance, Scalar beta) {
  if (!(beta > Scalar(0))) throw ValidationError("ucb: beta must be positive");
  if (!std::isfinite(mean) || !std::isfinite(variance)) throw ValidationError("ucb: non-finite posterior");
  return mean - std::sqrt(beta) * std::sqrt(std::max(variance, Scalar(0)));
}

inline double ucb(const Posterior& post, double beta) { return ucb(post.mean, post.variance, beta); }

/// max_i(w_i y_i) + rho * sum_i(w_i y_i).
template <typename DerivedY, typename DerivedW>
typename DerivedY::Scalar tchebycheff(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedW>& w,
                                      typename DerivedY::Scalar rho) {
  if (y.size() != w.size()) throw DimensionError("tchebycheff: length mismatch");
  const auto weighted = y.cwiseProduct(w).eval();
  return weighted.maxCoeff() + rho * weighted.sum();
}

inline double tchebycheff(const Eigen::Ref<const Vector>& y, const ScalarizationWeights& weights) {
  return tchebycheff(y, weights.w, weights.rho);
}

/// Weights drawn uniformly from the simplex, deterministic given `seed`.
ScalarizationWeights sample_simplex_weights(int m, std::uint64_t seed, double rho = 0.05);

/// Checks the ScalarizationWeights invariants.
void validate_weights(const ScalarizationWeights& weights);

/// Min-max normalization of each column of `y` to the observed range;
/// a degenerate column maps to 0.
Matrix normalize_columns(const Matrix& y);

/// Per-evaluation context for `evaluate_acquisition`.
struct AcquisitionContext {
  // EI: incumbent per model (or one scalar for a scalarized model).
  std::vector<double> incumbents;
  // TS: one sampled function per model. Not safe to share across threads
  // while being rebuilt.
  std::vector<SamplePath> samples;
};

/// Thompson sampling context: one path per model drawn on a seeded uniform
/// grid of `grid_size` points in the unit box.
AcquisitionContext thompson_context(const std::vector<GaussianProcess>& models, std::uint64_t seed,
                                    int grid_size = 256);

/// Acquisition value per model at encoded point `x`. EI is reported as
/// improvement (larger is better); UCB, TS and posterior mean follow the
/// minimization convention.
Vector evaluate_acquisition(const AcquisitionSpec& spec, const std::vector<GaussianProcess>& models,
                            const Eigen::Ref<const Vector>& x, const AcquisitionContext& context);

}  // namespace oed
