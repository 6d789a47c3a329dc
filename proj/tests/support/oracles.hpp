#pragma once

// Independent reference implementations used to check the library.

#include <oed/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oed::oracle {

inline bool dominates(const Vector& a, const Vector& b) {
  bool strict = false;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (a(j) > b(j)) return false;
    if (a(j) < b(j)) strict = true;
  }
  return strict;
}

// Peels fronts by pairwise checks against the remaining points.
inline std::vector<std::vector<int>> fronts(const Matrix& pts) {
  std::vector<int> remaining(static_cast<std::size_t>(pts.rows()));
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<std::vector<int>> out;
  while (!remaining.empty()) {
    std::vector<int> front, rest;
    for (int i : remaining) {
      bool dominated = false;
      for (int k : remaining)
        if (dominates(pts.row(k).transpose(), pts.row(i).transpose())) dominated = true;
      (dominated ? rest : front).push_back(i);
    }
    out.push_back(front);
    remaining = rest;
  }
  return out;
}

// Sum over non-empty subsets of (-1)^(|S|+1) times the box of their join.
inline double hypervolume_inclusion_exclusion(const Matrix& pts, const Vector& ref) {
  const int n = static_cast<int>(pts.rows());
  double total = 0.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    Vector join = Vector::Constant(ref.size(), -std::numeric_limits<double>::infinity());
    int bits = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        join = join.cwiseMax(pts.row(i).transpose());
        ++bits;
      }
    double box = 1.0;
    for (Eigen::Index j = 0; j < ref.size(); ++j) box *= std::max(0.0, ref(j) - join(j));
    total += (bits % 2 == 1 ? 1.0 : -1.0) * box;
  }
  return total;
}

struct MonteCarlo {
  double value;
  double std_error;
};

// Uniform sampling of the box [min(points), ref].
inline MonteCarlo hypervolume_monte_carlo(const Matrix& pts, const Vector& ref, long samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vector lo = pts.colwise().minCoeff().transpose();
  const double box = (ref - lo).prod();
  long hits = 0;
  Vector s(ref.size());
  for (long k = 0; k < samples; ++k) {
    for (Eigen::Index j = 0; j < ref.size(); ++j) s(j) = lo(j) + u(rng) * (ref(j) - lo(j));
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      if ((pts.row(i).transpose().array() <= s.array()).all()) {
        ++hits;
        break;
      }
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  return {box * p, box * std::sqrt(p * (1 - p) / static_cast<double>(samples))};
}

// Crowding distance as usually written: sort per objective, infinite ends,
// normalized gap between sorted neighbors.
inline Vector crowding_textbook(const Matrix& front) {
  const Eigen::Index n = front.rows();
  Vector d = Vector::Zero(n);
  if (n < 3) return Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < front.cols(); ++j) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return front(a, j) < front(b, j); });
    const double range = front(order.back(), j) - front(order.front(), j);
    if (range == 0) continue;
    d(order.front()) = d(order.back()) = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k + 1 < n; ++k)
      d(order[k]) += (front(order[k + 1], j) - front(order[k - 1], j)) / range;
  }
  return d;
}

}  // namespace oed::oracle
