#pragma once

#include <oed/error.hpp>
#include <oed/types.hpp>

#include <nlohmann/json_fwd.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace oed {

/// Matérn 5/2 ARD covariance between the rows of `a` and `b`.
template <typename DerivedA, typename DerivedB, typename DerivedL>
MatrixX<typename DerivedA::Scalar> matern52(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                            const Eigen::MatrixBase<DerivedL>& lengthscales,
                                            typename DerivedA::Scalar variance) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar sqrt5 = std::sqrt(Scalar(5));
  const auto inv = lengthscales.cwiseInverse().transpose().eval();
  const MatrixX<Scalar> as = a.array().rowwise() * inv.array();
  const MatrixX<Scalar> bs = b.array().rowwise() * inv.array();
  MatrixX<Scalar> k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Scalar r = std::sqrt((as.row(i) - bs.row(j)).squaredNorm());
      k(i, j) = variance * (Scalar(1) + sqrt5 * r + Scalar(5) / Scalar(3) * r * r) * std::exp(-sqrt5 * r);
    }
  }
  return k;
}

/// Kernel hyperparameters. Variances and the prior mean are expressed in the
/// units of whatever targets they accompany.
struct GPHyperparams {
  Vector lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
  double prior_mean = 0.0;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

struct FitOptions {
  int restarts = 5;
  int max_iterations = 200;
  double lengthscale_lower = 1e-3;
  double lengthscale_upper = 10.0;
  double signal_lower = 1e-2;
  double signal_upper = 1e2;
  double noise_lower = 1e-10;
  double noise_upper = 1.0;
  // Pins the standardized noise variance instead of fitting it.
  std::optional<double> fixed_noise;
};

struct LogLikelihood {
  double value = 0.0;
  Vector gradient;  // w.r.t. [log lengthscales..., log signal variance, log noise variance]
};

/// Log marginal likelihood of a zero-mean GP with Matérn 5/2 kernel and its
/// gradient in log-parameter space. Throws ConditioningError if the kernel
/// matrix cannot be factorized even after jitter escalation.
LogLikelihood log_marginal_likelihood(const Matrix& inputs, const Vector& targets, const Vector& log_params);

class SamplePath;

/// A fitted single-output Gaussian process. Immutable; safe for concurrent
/// prediction and sampling.
class GaussianProcess {
 public:
  /// Fits hyperparameters by multi-restart maximization of the log marginal
  /// likelihood on standardized targets. Duplicate inputs are merged by
  /// averaging their targets.
  static GaussianProcess fit(const Matrix& inputs, const Vector& targets, std::uint64_t seed,
                             const FitOptions& options = {});

  /// Builds the model for fixed standardized-space hyperparameters.
  static GaussianProcess with_hyperparams(const Matrix& inputs, const Vector& targets,
                                          const GPHyperparams& standardized);

  Posterior predict(const Eigen::Ref<const Vector>& x) const;
  /// Row-wise prediction; identical to calling `predict` per row.
  std::vector<Posterior> predict_all(const Matrix& xs) const;

  /// One joint posterior draw of the latent function over `candidates`,
  /// in target units. Deterministic given `seed`.
  Vector sample_path(const Matrix& candidates, std::uint64_t seed) const;

  /// A joint draw over `grid`, extended to arbitrary inputs by its
  /// conditional mean. Deterministic given `seed`.
  SamplePath draw_path(const Matrix& grid, std::uint64_t seed) const;

  /// Hyperparameters in target units (variances scaled by the target variance).
  GPHyperparams hyperparams() const;
  const GPHyperparams& standardized_hyperparams() const { return params_; }

  int dim() const { return static_cast<int>(inputs_.cols()); }
  const Matrix& inputs() const { return inputs_; }
  const Vector& targets() const { return targets_; }
  double target_mean() const { return mean_; }
  double target_std() const { return std_; }
  bool degenerate() const { return degenerate_; }
  double log_likelihood() const { return lml_; }
  double jitter() const { return jitter_; }
  /// Log marginal likelihood reached by each restart, in order.
  const std::vector<double>& restart_log_likelihoods() const { return restart_lml_; }

  nlohmann::json to_json() const;
  static GaussianProcess from_json(const nlohmann::json& doc);

 private:
  GaussianProcess() = default;
  void factorize();
  Vector cross_covariance(const Eigen::Ref<const Vector>& x) const;

  Matrix inputs_;
  Vector targets_;       // merged, original units
  Vector standardized_;  // (targets - mean) / std
  double mean_ = 0.0;
  double std_ = 1.0;
  bool degenerate_ = false;
  GPHyperparams params_;  // standardized units, prior_mean = 0
  double jitter_ = 0.0;
  double lml_ = 0.0;
  std::vector<double> restart_lml_;
  std::shared_ptr<const Eigen::LLT<Matrix>> chol_;
  Vector alpha_;

  friend class SamplePath;
};

/// A sampled function: a joint posterior draw on a grid, evaluated elsewhere
/// through its conditional mean given the draw.
class SamplePath {
 public:
  double operator()(const Eigen::Ref<const Vector>& x) const;
  /// The raw draw on the grid, in target units.
  const Vector& grid_values() const { return grid_values_; }

 private:
  friend class GaussianProcess;
  std::shared_ptr<const GaussianProcess> model_;
  Matrix grid_;
  Vector grid_weights_;   // Sigma_SS^{-1} (f_S - m_S)
  Vector data_weights_;   // alpha - K^{-1} K_XS grid_weights
  Vector grid_values_;
};

}  // namespace oed
