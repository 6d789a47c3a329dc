#include <oed/surrogate.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>

namespace oed {

using nlohmann::json;

namespace {

constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
constexpr double kNegativeVarianceTolerance = 1e-8;

// Cholesky of `k` with the jitter ladder; reports the jitter used.
std::shared_ptr<Eigen::LLT<Matrix>> factorize_with_jitter(const Matrix& k, double* jitter_used) {
  const Eigen::Index n = k.rows();
  for (double jitter : kJitterLadder) {
    auto llt = std::make_shared<Eigen::LLT<Matrix>>(k + jitter * Matrix::Identity(n, n));
    if (llt->info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
  }
  throw ConditioningError("kernel matrix is not positive definite after jitter escalation to 1e-6");
}

struct Unpacked {
  Vector lengthscales;
  double signal = 1.0;
  double noise = 1e-6;
};

Unpacked unpack(const Vector& log_params) {
  const Eigen::Index d = log_params.size() - 2;
  return {log_params.head(d).array().exp().matrix(), std::exp(log_params(d)), std::exp(log_params(d + 1))};
}

// Box-constrained minimization with projected L-BFGS and Armijo backtracking.
template <typename Objective>
Vector minimize_bounded(const Objective& objective, Vector x, const Vector& lower, const Vector& upper,
                        int max_iterations) {
  auto project = [&](const Vector& v) { return v.cwiseMax(lower).cwiseMin(upper).eval(); };
  auto projected_gradient = [&](const Vector& at, const Vector& g) {
    Vector pg = g;
    for (Eigen::Index i = 0; i < at.size(); ++i)
      if ((at(i) <= lower(i) && g(i) > 0) || (at(i) >= upper(i) && g(i) < 0) || lower(i) == upper(i)) pg(i) = 0;
    return pg;
  };

  x = project(x);
  auto [f, g] = objective(x);
  if (!std::isfinite(f)) return x;
  std::deque<std::pair<Vector, Vector>> memory;
  constexpr std::size_t kMemory = 10;
  constexpr double kMaxStep = 2.0;

  for (int it = 0; it < max_iterations; ++it) {
    const Vector pg = projected_gradient(x, g);
    if (pg.lpNorm<Eigen::Infinity>() < 1e-7) break;

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Vector d;
      if (memory.empty() || attempt == 1) {
        d = -pg;
      } else {
        // Two-loop recursion.
        Vector q = pg;
        std::vector<double> a(memory.size());
        for (std::size_t k = memory.size(); k-- > 0;) {
          const auto& [s, y] = memory[k];
          a[k] = s.dot(q) / y.dot(s);
          q -= a[k] * y;
        }
        const auto& [s_last, y_last] = memory.back();
        q *= s_last.dot(y_last) / y_last.squaredNorm();
        for (std::size_t k = 0; k < memory.size(); ++k) {
          const auto& [s, y] = memory[k];
          const double b = y.dot(q) / y.dot(s);
          q += (a[k] - b) * s;
        }
        d = -q;
        for (Eigen::Index i = 0; i < d.size(); ++i)
          if (pg(i) == 0.0) d(i) = 0.0;
        if (d.dot(pg) >= 0) d = -pg;
      }
      const double scale = d.lpNorm<Eigen::Infinity>();
      if (scale == 0.0) break;
      double step = std::min(1.0, kMaxStep / scale);
      for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
        const Vector candidate = project(x + step * d);
        auto [fc, gc] = objective(candidate);
        if (std::isfinite(fc) && fc <= f + 1e-4 * g.dot(candidate - x)) {
          const Vector s = candidate - x;
          const Vector y = gc - g;
          if (s.dot(y) > 1e-12) {
            memory.emplace_back(s, y);
            if (memory.size() > kMemory) memory.pop_front();
          }
          const double improvement = f - fc;
          x = candidate;
          f = fc;
          g = gc;
          accepted = true;
          if (improvement < 1e-12 * (1.0 + std::abs(f))) return x;
          break;
        }
      }
      if (!accepted) memory.clear();
    }
    if (!accepted) break;
  }
  return x;
}

}  // namespace

LogLikelihood log_marginal_likelihood(const Matrix& inputs, const Vector& targets, const Vector& log_params) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = inputs.cols();
  if (log_params.size() != d + 2) throw DimensionError("log_marginal_likelihood: parameter length mismatch");
  const Unpacked p = unpack(log_params);

  const Matrix kf = matern52(inputs, inputs, p.lengthscales, p.signal);
  double jitter = 0.0;
  const auto llt = factorize_with_jitter(kf + p.noise * Matrix::Identity(n, n), &jitter);
  const Vector alpha = llt->solve(targets);
  const Matrix& l = llt->matrixLLT();
  const double log_det = 2.0 * l.diagonal().array().log().sum();

  LogLikelihood out;
  out.value = -0.5 * targets.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // dL/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
  const Matrix w = alpha * alpha.transpose() - llt->solve(Matrix::Identity(n, n));
  out.gradient = Vector::Zero(d + 2);
  const double sqrt5 = std::sqrt(5.0);
  const Vector inv_l2 = p.lengthscales.array().square().inverse();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const Vector diff = (inputs.row(i) - inputs.row(j)).transpose();
      const double r = std::sqrt((diff.array().square() * inv_l2.array()).sum());
      // d k / d log l_k = s2 * 5/3 * (1 + sqrt5 r) exp(-sqrt5 r) * diff_k^2 / l_k^2
      const double base = p.signal * (5.0 / 3.0) * (1.0 + sqrt5 * r) * std::exp(-sqrt5 * r);
      out.gradient.head(d).array() += w(i, j) * base * diff.array().square() * inv_l2.array();
    }
  }
  out.gradient.head(d) *= 0.5;
  out.gradient(d) = 0.5 * (w.array() * kf.array()).sum();
  out.gradient(d + 1) = 0.5 * p.noise * w.trace();
  return out;
}

GaussianProcess GaussianProcess::fit(const Matrix& inputs, const Vector& targets, std::uint64_t seed,
                                     const FitOptions& options) {
  if (inputs.rows() != targets.size()) throw DimensionError("fit: inputs and targets disagree in length");
  if (!inputs.allFinite() || !targets.allFinite()) throw ValidationError("fit: non-finite input");

  // Merge duplicate rows by averaging their targets.
  std::vector<Eigen::Index> representative;
  std::vector<std::vector<double>> grouped;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    std::size_t g = 0;
    for (; g < representative.size(); ++g)
      if ((inputs.row(representative[g]) - inputs.row(i)).lpNorm<Eigen::Infinity>() <= 1e-12) break;
    if (g == representative.size()) {
      representative.push_back(i);
      grouped.emplace_back();
    }
    grouped[g].push_back(targets(i));
  }
  const auto n = static_cast<Eigen::Index>(representative.size());
  if (n < 2) throw InsufficientDataError("fit: need at least 2 distinct observations, got " + std::to_string(n));

  GaussianProcess gp;
  gp.inputs_.resize(n, inputs.cols());
  gp.targets_.resize(n);
  for (Eigen::Index g = 0; g < n; ++g) {
    gp.inputs_.row(g) = inputs.row(representative[g]);
    double sum = 0.0;
    for (double v : grouped[g]) sum += v;
    gp.targets_(g) = sum / static_cast<double>(grouped[g].size());
  }
  gp.mean_ = gp.targets_.mean();
  gp.std_ = std::sqrt((gp.targets_.array() - gp.mean_).square().mean());
  if (!(gp.std_ > 1e-12 * std::max(1.0, std::abs(gp.mean_)))) {
    gp.std_ = 1.0;
    gp.degenerate_ = true;
  }
  gp.standardized_ = (gp.targets_.array() - gp.mean_) / gp.std_;

  const Eigen::Index d = inputs.cols();
  Vector lower(d + 2), upper(d + 2);
  lower.head(d).setConstant(std::log(options.lengthscale_lower));
  upper.head(d).setConstant(std::log(options.lengthscale_upper));
  lower(d) = std::log(options.signal_lower);
  upper(d) = std::log(options.signal_upper);
  if (options.fixed_noise) {
    lower(d + 1) = upper(d + 1) = std::log(*options.fixed_noise);
  } else {
    lower(d + 1) = std::log(options.noise_lower);
    upper(d + 1) = std::log(options.noise_upper);
  }

  auto negative_lml = [&](const Vector& theta) -> std::pair<double, Vector> {
    try {
      auto r = log_marginal_likelihood(gp.inputs_, gp.standardized_, theta);
      if (!std::isfinite(r.value) || !r.gradient.allFinite())
        return {std::numeric_limits<double>::infinity(), Vector::Zero(theta.size())};
      return {-r.value, -r.gradient};
    } catch (const ConditioningError&) {
      return {std::numeric_limits<double>::infinity(), Vector::Zero(theta.size())};
    }
  };

  Vector best;
  double best_value = -std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, options.restarts);
  for (int r = 0; r < restarts; ++r) {
    Vector start(d + 2);
    if (r == 0) {
      start.head(d).setConstant(std::log(0.5));
      start(d) = 0.0;
      start(d + 1) = std::log(1e-3);
    } else {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Eigen::Index i = 0; i < d + 2; ++i) start(i) = lower(i) + u(rng) * (upper(i) - lower(i));
    }
    start = start.cwiseMax(lower).cwiseMin(upper);
    const Vector theta = minimize_bounded(negative_lml, start, lower, upper, options.max_iterations);
    const double value = -negative_lml(theta).first;
    gp.restart_lml_.push_back(value);
    if (value > best_value || best.size() == 0) {
      best_value = value;
      best = theta;
    }
  }
  if (!std::isfinite(best_value))
    throw ConditioningError("fit: no hyperparameter setting produced a factorizable kernel matrix");

  const Unpacked p = unpack(best);
  gp.params_ = {p.lengthscales, p.signal, p.noise, 0.0};
  gp.factorize();
  return gp;
}

GaussianProcess GaussianProcess::with_hyperparams(const Matrix& inputs, const Vector& targets,
                                                  const GPHyperparams& standardized) {
  if (inputs.rows() != targets.size()) throw DimensionError("inputs and targets disagree in length");
  if (inputs.rows() < 1) throw InsufficientDataError("model needs at least one observation");
  if (standardized.lengthscales.size() != inputs.cols()) throw DimensionError("lengthscale count mismatch");
  GaussianProcess gp;
  gp.inputs_ = inputs;
  gp.targets_ = targets;
  gp.mean_ = targets.mean();
  gp.std_ = std::sqrt((targets.array() - gp.mean_).square().mean());
  if (!(gp.std_ > 1e-12 * std::max(1.0, std::abs(gp.mean_)))) {
    gp.std_ = 1.0;
    gp.degenerate_ = true;
  }
  gp.standardized_ = (targets.array() - gp.mean_) / gp.std_;
  gp.params_ = standardized;
  gp.params_.prior_mean = 0.0;
  gp.factorize();
  return gp;
}

void GaussianProcess::factorize() {
  const Eigen::Index n = inputs_.rows();
  const Matrix k = matern52(inputs_, inputs_, params_.lengthscales, params_.signal_variance) +
                   params_.noise_variance * Matrix::Identity(n, n);
  chol_ = factorize_with_jitter(k, &jitter_);
  alpha_ = chol_->solve(standardized_);
  const Matrix& l = chol_->matrixLLT();
  lml_ = -0.5 * standardized_.dot(alpha_) - l.diagonal().array().log().sum() -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

Vector GaussianProcess::cross_covariance(const Eigen::Ref<const Vector>& x) const {
  return matern52(inputs_, x.transpose(), params_.lengthscales, params_.signal_variance);
}

Posterior GaussianProcess::predict(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim())
    throw DimensionError("predict: expected dimension " + std::to_string(dim()) + ", got " + std::to_string(x.size()));
  const Vector k = cross_covariance(x);
  const double mean = k.dot(alpha_);
  const Vector v = chol_->matrixL().solve(k);
  double var = params_.signal_variance - v.squaredNorm() + params_.noise_variance;
  if (var < -kNegativeVarianceTolerance)
    throw ConditioningError("predict: negative posterior variance " + std::to_string(var));
  var = std::max(var, 0.0);
  return {mean_ + std_ * mean, var * std_ * std_};
}

std::vector<Posterior> GaussianProcess::predict_all(const Matrix& xs) const {
  std::vector<Posterior> out;
  out.reserve(static_cast<std::size_t>(xs.rows()));
  for (Eigen::Index i = 0; i < xs.rows(); ++i) out.push_back(predict(Vector(xs.row(i).transpose())));
  return out;
}

GPHyperparams GaussianProcess::hyperparams() const {
  return {params_.lengthscales, params_.signal_variance * std_ * std_, params_.noise_variance * std_ * std_, mean_};
}

Vector GaussianProcess::sample_path(const Matrix& candidates, std::uint64_t seed) const {
  if (candidates.rows() == 0) throw PreconditionError("sample_path: empty candidate set");
  if (candidates.cols() != dim()) throw DimensionError("sample_path: candidate dimension mismatch");
  const Matrix kxs = matern52(inputs_, candidates, params_.lengthscales, params_.signal_variance);
  const Vector mean = kxs.transpose() * alpha_;
  const Matrix v = chol_->matrixL().solve(kxs);
  Matrix cov = matern52(candidates, candidates, params_.lengthscales, params_.signal_variance) - v.transpose() * v;
  cov = 0.5 * (cov + cov.transpose());
  const auto llt = factorize_with_jitter(cov, nullptr);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(candidates.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Vector draw = mean + llt->matrixL() * z;
  return (mean_ + std_ * draw.array()).matrix();
}

SamplePath GaussianProcess::draw_path(const Matrix& grid, std::uint64_t seed) const {
  if (grid.rows() == 0) throw PreconditionError("draw_path: empty grid");
  if (grid.cols() != dim()) throw DimensionError("draw_path: grid dimension mismatch");
  const Matrix kxs = matern52(inputs_, grid, params_.lengthscales, params_.signal_variance);
  const Vector mean = kxs.transpose() * alpha_;
  const Matrix v = chol_->matrixL().solve(kxs);
  Matrix cov = matern52(grid, grid, params_.lengthscales, params_.signal_variance) - v.transpose() * v;
  cov = 0.5 * (cov + cov.transpose());
  const auto llt = factorize_with_jitter(cov, nullptr);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(grid.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);

  SamplePath path;
  path.model_ = std::make_shared<const GaussianProcess>(*this);
  path.grid_ = grid;
  path.grid_weights_ = llt->matrixU().solve(z);
  path.data_weights_ = alpha_ - chol_->solve(kxs * path.grid_weights_);
  path.grid_values_ = (mean_ + std_ * (mean + llt->matrixL() * z).array()).matrix();
  return path;
}

double SamplePath::operator()(const Eigen::Ref<const Vector>& x) const {
  const GaussianProcess& gp = *model_;
  if (x.size() != gp.dim()) throw DimensionError("sample path: dimension mismatch");
  const auto& p = gp.params_;
  const double value = matern52(grid_, x.transpose(), p.lengthscales, p.signal_variance).col(0).dot(grid_weights_) +
                       matern52(gp.inputs_, x.transpose(), p.lengthscales, p.signal_variance).col(0).dot(data_weights_);
  return gp.mean_ + gp.std_ * value;
}

json GaussianProcess::to_json() const {
  json rows = json::array();
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(inputs_.cols()));
    for (Eigen::Index j = 0; j < inputs_.cols(); ++j) r[static_cast<std::size_t>(j)] = inputs_(i, j);
    rows.push_back(r);
  }
  return {{"kernel", "matern52"},
          {"lengthscales", std::vector<double>(params_.lengthscales.data(),
                                               params_.lengthscales.data() + params_.lengthscales.size())},
          {"signal_variance", params_.signal_variance},
          {"noise_variance", params_.noise_variance},
          {"inputs", rows},
          {"targets", std::vector<double>(targets_.data(), targets_.data() + targets_.size())}};
}

GaussianProcess GaussianProcess::from_json(const json& doc) {
  try {
    const auto rows = doc.at("inputs").get<std::vector<std::vector<double>>>();
    const auto targets = doc.at("targets").get<std::vector<double>>();
    const auto ls = doc.at("lengthscales").get<std::vector<double>>();
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ls.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != ls.size()) throw DimensionError("model input row length mismatch");
      for (std::size_t j = 0; j < ls.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    GPHyperparams h;
    h.lengthscales = Eigen::Map<const Vector>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    h.signal_variance = doc.at("signal_variance").get<double>();
    h.noise_variance = doc.at("noise_variance").get<double>();
    return with_hyperparams(x, Eigen::Map<const Vector>(targets.data(), static_cast<Eigen::Index>(targets.size())), h);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace oed
