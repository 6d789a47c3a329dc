#pragma once

// Multi-objective arithmetic shared by the solver, selection and reporting.
// Point sets are matrices with one point per row, minimization convention.

#include <oed/error.hpp>
#include <oed/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oed {

/// Index sets; front 0 is the non-dominated set. Indices ascend within a front.
struct FrontPartition {
  std::vector<std::vector<int>> fronts;

  int rank_of(int index) const {
    for (std::size_t k = 0; k < fronts.size(); ++k)
      if (std::find(fronts[k].begin(), fronts[k].end(), index) != fronts[k].end()) return static_cast<int>(k);
    return -1;
  }
};

/// a dominates b: no worse everywhere, strictly better somewhere.
template <typename DerivedA, typename DerivedB>
bool dominates(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw DimensionError("dominates: length mismatch");
  bool strictly = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > b(i)) return false;
    if (a(i) < b(i)) strictly = true;
  }
  return strictly;
}

/// Fast non-dominated sort. Equal points share a front.
template <typename Derived>
FrontPartition non_dominated_sort(const Eigen::MatrixBase<Derived>& points) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) throw PreconditionError("non_dominated_sort: empty input");
  std::vector<std::vector<int>> dominated_by_me(n);
  std::vector<int> domination_count(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (dominates(points.row(i), points.row(j))) {
        dominated_by_me[i].push_back(j);
        ++domination_count[j];
      } else if (dominates(points.row(j), points.row(i))) {
        dominated_by_me[j].push_back(i);
        ++domination_count[i];
      }
    }
  }
  FrontPartition out;
  std::vector<int> current;
  for (int i = 0; i < n; ++i)
    if (domination_count[i] == 0) current.push_back(i);
  while (!current.empty()) {
    std::vector<int> next;
    for (int i : current)
      for (int j : dominated_by_me[i])
        if (--domination_count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    out.fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return out;
}

/// Row indices of the non-dominated points, ascending.
template <typename Derived>
std::vector<int> non_dominated_indices(const Eigen::MatrixBase<Derived>& points) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    bool dominated = false;
    for (Eigen::Index j = 0; j < points.rows() && !dominated; ++j)
      dominated = j != i && dominates(points.row(j), points.row(i));
    if (!dominated) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// NSGA-II crowding distance. Points attaining the min or max of an objective
/// get +inf; others accumulate (next larger - next smaller) / range per
/// objective. A zero-range objective contributes nothing. Neighbors are taken
/// over distinct values, so the result does not depend on input order.
template <typename Derived>
VectorX<typename Derived::Scalar> crowding_distance(const Eigen::MatrixBase<Derived>& front) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = front.rows();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  VectorX<Scalar> dist = VectorX<Scalar>::Zero(n);
  if (n < 3) {
    dist.setConstant(inf);
    return dist;
  }
  for (Eigen::Index j = 0; j < front.cols(); ++j) {
    std::vector<Scalar> values(n);
    for (Eigen::Index i = 0; i < n; ++i) values[i] = front(i, j);
    std::vector<Scalar> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const Scalar lo = distinct.front(), hi = distinct.back();
    const Scalar range = hi - lo;
    if (range == Scalar(0)) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar v = values[i];
      if (v == lo || v == hi) {
        dist(i) = inf;
        continue;
      }
      auto pos = std::lower_bound(distinct.begin(), distinct.end(), v);
      dist(i) += (*(pos + 1) - *(pos - 1)) / range;
    }
  }
  return dist;
}

namespace detail {

template <typename Scalar>
using Points = std::vector<std::vector<Scalar>>;

// Area dominated by 2-d points with respect to (r0, r1).
template <typename Scalar>
Scalar hv2d(Points<Scalar> pts, Scalar r0, Scalar r1) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  Scalar area = 0, ceiling = r1;
  for (const auto& p : pts) {
    if (p[1] < ceiling) {
      area += (r0 - p[0]) * (ceiling - p[1]);
      ceiling = p[1];
    }
  }
  return area;
}

// Volume for three objectives by slicing along the last axis.
template <typename Scalar>
Scalar hv3d(Points<Scalar> pts, const std::vector<Scalar>& ref) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a[2] < b[2]; });
  Scalar volume = 0;
  Points<Scalar> active;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    active.push_back({pts[k][0], pts[k][1]});
    const Scalar top = (k + 1 < pts.size()) ? pts[k + 1][2] : ref[2];
    const Scalar depth = top - pts[k][2];
    if (depth > 0) volume += depth * hv2d(active, ref[0], ref[1]);
  }
  return volume;
}

}  // namespace detail

struct HypervolumeEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero for exact results
  bool exact = true;
};

struct HypervolumeOptions {
  std::int64_t samples = 100'000;
  std::uint64_t seed = 0;
};

/// Hypervolume dominated by `points` (rows) and bounded by `ref`. Exact for
/// up to three objectives; seeded Monte Carlo with a standard error otherwise.
/// Every point must weakly dominate `ref`.
template <typename Derived, typename DerivedRef>
HypervolumeEstimate hypervolume_estimate(const Eigen::MatrixBase<Derived>& points,
                                         const Eigen::MatrixBase<DerivedRef>& ref,
                                         const HypervolumeOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = ref.size();
  if (points.rows() > 0 && points.cols() != m) throw DimensionError("hypervolume: reference point length mismatch");
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (!(points(i, j) <= ref(j)))
        throw PreconditionError("hypervolume: point " + std::to_string(i) + " is worse than the reference point");

  HypervolumeEstimate out;
  if (points.rows() == 0) return out;

  // Only the non-dominated, de-duplicated points matter.
  detail::Points<Scalar> pts;
  for (int i : non_dominated_indices(points)) {
    std::vector<Scalar> p(m);
    for (Eigen::Index j = 0; j < m; ++j) p[j] = points(i, j);
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(std::move(p));
  }
  std::vector<Scalar> r(m);
  for (Eigen::Index j = 0; j < m; ++j) r[j] = ref(j);

  if (m == 1) {
    out.value = static_cast<double>(r[0] - pts.front()[0]);
  } else if (m == 2) {
    out.value = static_cast<double>(detail::hv2d(pts, r[0], r[1]));
  } else if (m == 3) {
    out.value = static_cast<double>(detail::hv3d(pts, r));
  } else {
    std::vector<Scalar> lo(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      lo[j] = r[j];
      for (const auto& p : pts) lo[j] = std::min(lo[j], p[j]);
    }
    double box = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) box *= static_cast<double>(r[j] - lo[j]);
    out.exact = false;
    if (box == 0.0) return out;
    Rng rng(options.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::int64_t hits = 0;
    std::vector<double> s(m);
    for (std::int64_t k = 0; k < options.samples; ++k) {
      for (Eigen::Index j = 0; j < m; ++j) s[j] = lo[j] + u(rng) * (r[j] - lo[j]);
      for (const auto& p : pts) {
        bool covered = true;
        for (Eigen::Index j = 0; j < m && covered; ++j) covered = p[j] <= s[j];
        if (covered) {
          ++hits;
          break;
        }
      }
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(options.samples);
    out.value = box * frac;
    out.std_error = box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(options.samples));
  }
  return out;
}

template <typename Derived, typename DerivedRef>
double hypervolume(const Eigen::MatrixBase<Derived>& points, const Eigen::MatrixBase<DerivedRef>& ref,
                   const HypervolumeOptions& options = {}) {
  return hypervolume_estimate(points, ref, options).value;
}

/// Reference point at the per-objective max of `points` plus `margin` times
/// the observed range. A zero range is widened by `margin` * max(1, |max|).
template <typename Derived>
VectorX<typename Derived::Scalar> reference_point(const Eigen::MatrixBase<Derived>& points,
                                                  typename Derived::Scalar margin = 0.1) {
  using Scalar = typename Derived::Scalar;
  if (points.rows() == 0) throw PreconditionError("reference_point: no points");
  VectorX<Scalar> hi = points.colwise().maxCoeff().transpose();
  VectorX<Scalar> lo = points.colwise().minCoeff().transpose();
  VectorX<Scalar> ref(hi.size());
  for (Eigen::Index j = 0; j < hi.size(); ++j) {
    const Scalar range = hi(j) - lo(j);
    ref(j) = hi(j) + (range > 0 ? margin * range : margin * std::max(Scalar(1), std::abs(hi(j))));
  }
  return ref;
}

}  // namespace oed
