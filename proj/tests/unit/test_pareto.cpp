#include <doctest.h>
#include <generators.hpp>
#include <oracles.hpp>

#include <oed/pareto.hpp>

using namespace oed;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> list) {
  Matrix m(static_cast<Eigen::Index>(list.size()), static_cast<Eigen::Index>(list.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : list) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> list) {
  Vector v(static_cast<Eigen::Index>(list.size()));
  Eigen::Index i = 0;
  for (double x : list) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("dominance examples") {
  CHECK(dominates(vec({1, 2}), vec({2, 3})));
  CHECK_FALSE(dominates(vec({1, 3}), vec({2, 2})));
  CHECK_FALSE(dominates(vec({1, 2}), vec({1, 2})));
  CHECK(dominates(vec({1, 2}), vec({1, 3})));
  CHECK_THROWS_AS(dominates(vec({1, 2}), vec({1, 2, 3})), DimensionError);
}

TEST_CASE("dominance is a strict partial order") {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const Matrix p = testing::random_points(rng, 3, 3, 3);
    const Vector a = p.row(0).transpose(), b = p.row(1).transpose(), c = p.row(2).transpose();
    CHECK_FALSE(dominates(a, a));
    if (dominates(a, b)) CHECK_FALSE(dominates(b, a));
    if (dominates(a, b) && dominates(b, c)) CHECK(dominates(a, c));
  }
}

TEST_CASE("non-dominated sort examples") {
  const auto part = non_dominated_sort(rows({{1, 1}, {2, 2}, {0, 3}, {3, 0}}));
  REQUIRE(part.fronts.size() == 2);
  CHECK(part.fronts[0] == std::vector<int>{0, 2, 3});
  CHECK(part.fronts[1] == std::vector<int>{1});
  CHECK(part.fronts == oracle::fronts(rows({{1, 1}, {2, 2}, {0, 3}, {3, 0}})));

  const auto same = non_dominated_sort(rows({{1, 1}, {1, 1}, {1, 1}}));
  CHECK(same.fronts.size() == 1);
  CHECK(same.fronts[0].size() == 3);

  const auto chain = non_dominated_sort(rows({{1, 1}, {2, 2}, {3, 3}}));
  CHECK(chain.fronts.size() == 3);
  CHECK_THROWS_AS(non_dominated_sort(Matrix(0, 2)), PreconditionError);
}

TEST_CASE("non-dominated sort matches the pairwise oracle") {
  Rng rng(17);
  std::uniform_int_distribution<int> size(1, 50), objectives(2, 4), levels(0, 1);
  for (int t = 0; t < 200; ++t) {
    const Matrix p = testing::random_points(rng, size(rng), objectives(rng), levels(rng) ? 4 : 0);
    const auto part = non_dominated_sort(p);
    CHECK(part.fronts == oracle::fronts(p));
    for (std::size_t r = 0; r < part.fronts.size(); ++r)
      for (int i : part.fronts[r]) CHECK(part.rank_of(i) == static_cast<int>(r));
  }
}

TEST_CASE("crowding distance") {
  const Vector two = crowding_distance(rows({{0, 1}, {1, 0}}));
  CHECK(std::isinf(two(0)));
  CHECK(std::isinf(two(1)));

  const Matrix line = rows({{0, 2}, {1, 1}, {2, 0}});
  const Vector cd = crowding_distance(line);
  const Vector expect = oracle::crowding_textbook(line);
  CHECK(std::isinf(cd(0)));
  CHECK(std::isinf(cd(2)));
  CHECK(cd(1) == doctest::Approx(expect(1)));
  CHECK(cd(1) == doctest::Approx(2.0));

  const Vector flat = crowding_distance(rows({{0, 5}, {1, 5}, {2, 5}, {4, 5}}));
  CHECK(flat(1) == doctest::Approx(0.5));
  CHECK(flat(2) == doctest::Approx(0.75));
  CHECK(flat.allFinite() == false);

  Rng rng(23);
  for (int t = 0; t < 200; ++t) {
    const Matrix p = testing::random_points(rng, 3 + t % 20, 2 + t % 3);
    const Vector got = crowding_distance(p), want = oracle::crowding_textbook(p);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      CHECK(got(i) >= 0.0);
      if (std::isinf(want(i))) CHECK(std::isinf(got(i)));
      else CHECK(got(i) == doctest::Approx(want(i)).epsilon(1e-12));
    }
    // Permutation equivariance.
    std::vector<int> perm(static_cast<std::size_t>(p.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix q(p.rows(), p.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) q.row(static_cast<Eigen::Index>(i)) = p.row(perm[i]);
    const Vector permuted = crowding_distance(q);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(permuted(static_cast<Eigen::Index>(i)) == got(perm[i]));
  }
}

TEST_CASE("hypervolume examples") {
  CHECK(hypervolume(rows({{0, 0}}), vec({1, 1})) == 1.0);
  CHECK(hypervolume(rows({{1, 2}, {2, 1}}), vec({3, 3})) == doctest::Approx(3.0));
  CHECK(hypervolume(rows({{1, 2}, {2, 1}, {2, 1}}), vec({3, 3})) == doctest::Approx(3.0));
  CHECK(hypervolume(rows({{1, 2}, {2, 1}}), vec({3, 3})) ==
        doctest::Approx(oracle::hypervolume_inclusion_exclusion(rows({{1, 2}, {2, 1}}), vec({3, 3}))));
  CHECK_THROWS_AS(hypervolume(rows({{4, 0}}), vec({3, 3})), PreconditionError);
  CHECK(hypervolume(Matrix(0, 2), vec({1, 1})) == 0.0);
  CHECK(hypervolume(rows({{0.25}}), vec({1.0})) == 0.75);
}

TEST_CASE("exact hypervolume matches inclusion-exclusion") {
  Rng rng(29);
  std::uniform_int_distribution<int> size(1, 5);
  for (int t = 0; t < 200; ++t) {
    const int m = 2 + t % 2;
    const Matrix p = testing::random_points(rng, size(rng), m);
    const Vector ref = Vector::Constant(m, 1.1);
    CHECK(std::abs(hypervolume(p, ref) - oracle::hypervolume_inclusion_exclusion(p, ref)) < 1e-9);
  }
}

TEST_CASE("hypervolume is monotone under added points") {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const int m = 2 + t % 3;
    Matrix p = testing::random_points(rng, 8, m);
    const Vector ref = Vector::Constant(m, 1.0);
    double previous = 0.0;
    for (Eigen::Index k = 1; k <= p.rows(); ++k) {
      HypervolumeOptions opts;
      opts.samples = 20000;
      const double now = m <= 3 ? hypervolume(p.topRows(k), ref) : hypervolume(p.topRows(k), ref, opts);
      if (m <= 3) CHECK(now >= previous - 1e-12);
      previous = now;
    }
  }
}

TEST_CASE("Monte Carlo estimate for four objectives agrees with inclusion-exclusion") {
  Rng rng(37);
  for (int t = 0; t < 10; ++t) {
    const Matrix p = testing::random_points(rng, 4, 4);
    const Vector ref = Vector::Constant(4, 1.0);
    const auto est = hypervolume_estimate(p, ref);
    CHECK_FALSE(est.exact);
    CHECK(est.std_error >= 0.0);
    CHECK(std::abs(est.value - oracle::hypervolume_inclusion_exclusion(p, ref)) < 4 * est.std_error + 1e-12);
  }
}

TEST_CASE("reference point") {
  const Vector r = reference_point(rows({{0, 1}, {2, 1}}));
  CHECK(r(0) == doctest::Approx(2.2));
  CHECK(r(1) == doctest::Approx(1.1));
  CHECK_THROWS_AS(reference_point(Matrix(0, 2)), PreconditionError);
}
