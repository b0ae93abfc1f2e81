#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "otmetrics/idf.hpp"
#include "otmetrics/transport.hpp"

using namespace otmetrics;

namespace {

CostMatrix cost_1d(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<Point> a, b;
  for (double x : xs) a.push_back({x});
  for (double y : ys) b.push_back({y});
  return cost_matrix(a, b);
}

oracles::Dense dense(const CostMatrix& c) {
  oracles::Dense out(c.rows(), std::vector<double>(c.cols()));
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) out[i][j] = c(i, j);
  }
  return out;
}

std::vector<double> random_masses(std::mt19937_64& rng, std::size_t n, int q) {
  // Multiples of 1/q summing to one, each at least 1/q.
  std::vector<int> units(n, 1);
  for (int left = q - static_cast<int>(n); left > 0; --left) ++units[uniform_below(rng, n)];
  std::vector<double> out;
  for (int u : units) out.push_back(static_cast<double>(u) / q);
  return out;
}

std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<Point> out(n, Point(dim));
  for (auto& p : out) {
    for (auto& x : p) x = fixtures::uniform(rng, -1.0, 1.0);
  }
  return out;
}

}  // namespace

TEST_CASE("cost matrix examples") {
  const auto c0 = cost_1d({0}, {0});
  CHECK(c0.rows() == 1);
  CHECK(c0(0, 0) == 0.0);
  const auto c1 = cost_1d({0, 2}, {1});
  CHECK(c1.rows() == 2);
  CHECK(c1.cols() == 1);
  CHECK(c1(0, 0) == 1.0);
  CHECK(c1(1, 0) == 1.0);
}

TEST_CASE("cost matrix against a double loop, and transposes on swap") {
  std::mt19937_64 rng(42);
  const auto xs = random_points(rng, 3, 5), ys = random_points(rng, 4, 5);
  const auto c = cost_matrix(xs, ys), ct = cost_matrix(ys, xs);
  CHECK(c.transposed() == ct);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(c(i, j) == doctest::Approx(oracles::euclid(xs[i], ys[j])).epsilon(1e-14));
  }
}

TEST_CASE("cost matrix rejects mixed dimensions") {
  std::vector<Point> a = {{0.0, 1.0}}, b = {{0.0}};
  CHECK_THROWS_AS(cost_matrix(a, b), ShapeMismatch);
}

TEST_CASE("emd on identical clouds is zero") {
  std::mt19937_64 rng(3);
  const auto xs = random_points(rng, 4, 3);
  const std::vector<double> a = {0.1, 0.2, 0.3, 0.4};
  CHECK(emd_exact(a, a, cost_matrix(xs, xs)).cost == 0.0);
}

TEST_CASE("emd 2x2 enumerated instance") {
  const std::vector<double> a = {0.5, 0.5}, b = {0.5, 0.5};
  const auto r = emd_exact(a, b, cost_1d({0, 1}, {0, 3}));
  CHECK(r.cost == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.plan.flow(0, 0) == doctest::Approx(0.5));
  CHECK(r.plan.flow(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("emd with a forced plan") {
  const std::vector<double> a = {0.5, 0.5}, b = {1.0};
  const auto r = emd_exact(a, b, cost_1d({0, 2}, {1}));
  CHECK(r.cost == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.plan.flow(0, 0) == 0.5);
  CHECK(r.plan.flow(1, 0) == 0.5);
}

TEST_CASE("emd matches vertex enumeration with a certificate") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + uniform_below(rng, 4), n = 1 + uniform_below(rng, 4);
    const int q = static_cast<int>(std::max(m, n) + uniform_below(rng, 7 - std::max(m, n)));
    const auto a = random_masses(rng, m, q), b = random_masses(rng, n, q);
    const auto cost = cost_matrix(random_points(rng, m, 2), random_points(rng, n, 2));
    const auto r = emd_exact(a, b, cost);
    CHECK(std::fabs(r.cost - oracles::emd_by_vertices(a, b, dense(cost))) <= 1e-9);
    CHECK(std::fabs(r.duality_gap) <= 1e-7 * (1.0 + r.cost));
    CHECK(r.dual_infeasibility <= 1e-9);
    for (std::size_t i = 0; i < m; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(r.plan.flow(i, j) >= 0.0);
        row += r.plan.flow(i, j);
      }
      CHECK(row == doctest::Approx(a[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("emd is bit-symmetric under swapping sides") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + uniform_below(rng, 6), n = 1 + uniform_below(rng, 6);
    std::vector<double> a(m), b(n);
    for (auto& x : a) x = 0.1 + fixtures::uniform01(rng);
    for (auto& x : b) x = 0.1 + fixtures::uniform01(rng);
    const auto da = DiscreteDistribution::normalized(random_points(rng, m, 3), a);
    const auto db = DiscreteDistribution::normalized(random_points(rng, n, 3), b);
    const auto c = cost_matrix(da.support, db.support);
    CHECK(emd_exact(da, db, c).cost == emd_exact(db, da, c.transposed()).cost);
  }
}

TEST_CASE("emd input validation") {
  const std::vector<double> a = {0.5, 0.5}, b = {1.0}, neg = {1.5, -0.5}, zero = {0.0, 0.0}, half = {0.5};
  const auto c = cost_1d({0, 1}, {0});
  CHECK_THROWS_AS(emd_exact(neg, b, c), InvalidDistribution);
  CHECK_THROWS_AS(emd_exact(zero, b, c), InvalidDistribution);
  // Masses are normalized before solving.
  CHECK(emd_exact(a, half, c).cost == emd_exact(a, b, c).cost);
  CHECK_THROWS_AS(emd_exact(b, b, c), ShapeMismatch);
}

TEST_CASE("sinkhorn on identical distributions at eps 0.1") {
  std::vector<Point> square = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const auto d = DiscreteDistribution::uniform(square);
  const auto r = sinkhorn(d, d, cost_matrix(square, square), 0.1, 1000, 1e-9);
  CHECK(r.converged);
  CHECK(r.cost >= 0.0);
  CHECK(r.cost <= 0.05);
}

TEST_CASE("sinkhorn approaches emd on the 2x2 instance") {
  const std::vector<double> a = {0.5, 0.5}, b = {0.5, 0.5};
  const auto r = sinkhorn(a, b, cost_1d({0, 1}, {0, 3}), 0.01, 10000, 1e-9);
  CHECK(std::fabs(r.cost - 1.0) <= 0.02);
}

TEST_CASE("sinkhorn with infinite tolerance stops at the kernel start") {
  const std::vector<double> a = {0.5, 0.5}, b = {0.5, 0.5};
  const auto c = cost_1d({0, 1}, {0, 3});
  const double eps = 0.5;
  const auto r = sinkhorn(a, b, c, eps, 100, std::numeric_limits<double>::infinity());
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  double total = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) total += std::exp(-c(i, j) / eps);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(r.plan.flow(i, j) == doctest::Approx(std::exp(-c(i, j) / eps) / total).epsilon(1e-12));
    }
  }
}

TEST_CASE("sinkhorn rejects a non-positive epsilon") {
  const std::vector<double> a = {1.0};
  CHECK_THROWS(sinkhorn(a, a, cost_1d({0}, {0}), 0.0, 10, 1e-6));
}

TEST_CASE("barycenter of identical inputs is the input") {
  std::vector<Point> support = {{0, 0}, {1, 0}, {0, 2}};
  const auto d = DiscreteDistribution::normalized(support, {0.2, 0.5, 0.3});
  const std::vector<DiscreteDistribution> dists = {d, d, d};
  const std::vector<double> w = {0.2, 0.3, 0.5};
  const auto r = barycenter_fixed_support(dists, w, 0.05, 5000, 1e-10);
  CHECK(r.converged);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(r.distribution.mass[i] - d.mass[i]) <= 1e-8);
}

TEST_CASE("barycenter with all weight on one input returns it") {
  std::vector<Point> support = {{0.0}, {1.0}};
  const auto p = DiscreteDistribution::normalized(support, {1.0, 0.0});
  const auto q = DiscreteDistribution::normalized(support, {0.0, 1.0});
  const std::vector<DiscreteDistribution> dists = {p, q};
  const std::vector<double> w = {1.0, 0.0};
  const auto r = barycenter_fixed_support(dists, w, 0.1, 100, 1e-9);
  CHECK(r.distribution.mass == p.mass);
}

TEST_CASE("barycenter of two diracs follows the entropic objective") {
  std::vector<Point> support = {{0.0}, {1.0}};
  const auto p = DiscreteDistribution::normalized(support, {1.0, 0.0});
  const auto q = DiscreteDistribution::normalized(support, {0.0, 1.0});
  const std::vector<DiscreteDistribution> dists = {p, q};

  SUBCASE("equal weights sit in the middle") {
    const std::vector<double> w = {0.5, 0.5};
    for (double eps : {0.05, 0.2, 1.0}) {
      const auto r = barycenter_fixed_support(dists, w, eps, 10000, 1e-12);
      CHECK(r.distribution.mass[0] == doctest::Approx(0.5).epsilon(1e-6));
    }
  }
  SUBCASE("unequal weights move towards uniform as eps grows") {
    const std::vector<double> w = {0.7, 0.3};
    double prev = 1.0;
    for (double eps : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0}) {
      const auto r = barycenter_fixed_support(dists, w, eps, 100000, 1e-13);
      const double expected = oracles::argmin_unit_interval(
          [&](double m) { return oracles::dirac_barycenter_objective(m, 1.0, 0.7, 0.3, eps); });
      CHECK(std::fabs(r.distribution.mass[0] - expected) <= 1e-5);
      CHECK(r.distribution.mass[0] < prev);
      CHECK(r.distribution.mass[0] > 0.5);
      prev = r.distribution.mass[0];
    }
  }
}

TEST_CASE("barycenter needs a shared support") {
  const auto p = DiscreteDistribution::uniform({{0.0}, {1.0}});
  const auto q = DiscreteDistribution::uniform({{0.0}, {2.0}});
  const std::vector<DiscreteDistribution> dists = {p, q};
  const std::vector<double> w = {0.5, 0.5};
  CHECK_THROWS_AS(barycenter_fixed_support(dists, w, 0.1, 10, 1e-6), SupportMismatch);
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> xs = {1000.0, 1000.0};
  CHECK(log_sum_exp(xs) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("emd on large supports with near-zero masses") {
  // Barycenter outputs look like this: many points, most carrying almost nothing.
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 60 + uniform_below(rng, 40);
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = std::exp(-40.0 * fixtures::uniform01(rng));
    for (auto& x : b) x = std::exp(-40.0 * fixtures::uniform01(rng));
    const auto pts = random_points(rng, n, 3);
    const auto da = DiscreteDistribution::normalized(pts, a), db = DiscreteDistribution::normalized(pts, b);
    const auto r = emd_exact(da, db, cost_matrix(pts, pts));
    CHECK(std::fabs(r.duality_gap) <= 1e-7 * (1.0 + r.cost));
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < n; ++j) row += r.plan.flow(i, j);
      CHECK(row == doctest::Approx(da.mass[i]).epsilon(1e-8));
    }
  }
}
