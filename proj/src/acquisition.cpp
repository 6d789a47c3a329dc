#include <oed/acquisition.hpp>

#include <random>

namespace oed {

std::string to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::expected_improvement: return "expected_improvement";
    case AcquisitionKind::upper_confidence_bound: return "upper_confidence_bound";
    case AcquisitionKind::thompson_sampling: return "thompson_sampling";
    case AcquisitionKind::posterior_mean: return "posterior_mean";
  }
  return "?";
}

AcquisitionKind parse_acquisition_kind(const std::string& text) {
  for (auto k : {AcquisitionKind::expected_improvement, AcquisitionKind::upper_confidence_bound,
                 AcquisitionKind::thompson_sampling, AcquisitionKind::posterior_mean})
    if (to_string(k) == text) return k;
  throw ValidationError("unknown acquisition kind '" + text + "'");
}

ScalarizationWeights sample_simplex_weights(int m, std::uint64_t seed, double rho) {
  // Normalized exponentials are uniform on the simplex.
  Rng rng(seed);
  std::exponential_distribution<double> e(1.0);
  Vector w(m);
  for (int i = 0; i < m; ++i) w(i) = e(rng);
  w /= w.sum();
  return {w, rho};
}

void validate_weights(const ScalarizationWeights& weights) {
  if ((weights.w.array() < 0).any()) throw ValidationError("scalarization weights must be non-negative");
  if (std::abs(weights.w.sum() - 1.0) > 1e-9) throw ValidationError("scalarization weights must sum to 1");
  if (!(weights.rho > 0)) throw ValidationError("scalarization rho must be positive");
}

Matrix normalize_columns(const Matrix& y) {
  Matrix out(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double lo = y.col(j).minCoeff(), hi = y.col(j).maxCoeff();
    if (hi > lo) out.col(j) = (y.col(j).array() - lo) / (hi - lo);
    else out.col(j).setZero();
  }
  return out;
}

AcquisitionContext thompson_context(const std::vector<GaussianProcess>& models, std::uint64_t seed, int grid_size) {
  AcquisitionContext ctx;
  if (models.empty()) return ctx;
  const int d = models.front().dim();
  Rng rng(mix_seed(seed, 0x7453));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix grid(grid_size, d);
  for (int i = 0; i < grid_size; ++i)
    for (int j = 0; j < d; ++j) grid(i, j) = u(rng);
  for (std::size_t k = 0; k < models.size(); ++k)
    ctx.samples.push_back(models[k].draw_path(grid, mix_seed(seed, 1000 + k)));
  return ctx;
}

Vector evaluate_acquisition(const AcquisitionSpec& spec, const std::vector<GaussianProcess>& models,
                            const Eigen::Ref<const Vector>& x, const AcquisitionContext& context) {
  const auto m = static_cast<Eigen::Index>(models.size());
  Vector out(m);
  switch (spec.kind) {
    case AcquisitionKind::posterior_mean:
      for (Eigen::Index i = 0; i < m; ++i) out(i) = models[i].predict(x).mean;
      break;
    case AcquisitionKind::expected_improvement:
      if (static_cast<Eigen::Index>(context.incumbents.size()) != m)
        throw PreconditionError("expected_improvement: context needs one incumbent per model");
      for (Eigen::Index i = 0; i < m; ++i) out(i) = expected_improvement(models[i].predict(x), context.incumbents[i]);
      break;
    case AcquisitionKind::upper_confidence_bound:
      for (Eigen::Index i = 0; i < m; ++i) out(i) = ucb(models[i].predict(x), spec.ucb_beta);
      break;
    case AcquisitionKind::thompson_sampling:
      if (static_cast<Eigen::Index>(context.samples.size()) != m)
        throw PreconditionError("thompson_sampling: context needs one sample path per model");
      for (Eigen::Index i = 0; i < m; ++i) out(i) = context.samples[i](x);
      break;
  }
  return out;
}

}  // namespace oed
