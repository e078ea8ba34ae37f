#include "rfx/entropy.hpp"
#include "rfx/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace rfx;

namespace {

Eigen::VectorXd random_simplex(Rng& rng, int n) {
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = rng.exponential();
  return d / d.sum();
}

double harmonic(int n) {
  double h = 0.0;
  for (int i = 1; i <= n; ++i) h += 1.0 / i;
  return h;
}

}  // namespace

TEST_SUITE("entropy") {

TEST_CASE("uniform distribution maxes every order") {
  Eigen::VectorXd u = Eigen::VectorXd::Constant(4, 0.25);
  for (double a : {0.0, 0.5, 1.0})
    CHECK(renyi_entropy(u, a) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("point mass has zero entropy") {
  Eigen::VectorXd d(3);
  d << 1.0, 0.0, 0.0;
  CHECK(renyi_entropy(d, 0.5) == doctest::Approx(0.0));
  CHECK(renyi_entropy(d, 1.0) == doctest::Approx(0.0));
  CHECK(renyi_entropy(d, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("Shannon entropy by hand") {
  Eigen::VectorXd d(3);
  d << 0.5, 0.25, 0.25;
  CHECK(renyi_entropy(d, 1.0) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("order monotonicity and the log n ceiling") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + rng.uniform_int(7);
    Eigen::VectorXd d = random_simplex(rng, n);
    double h0 = renyi_entropy(d, 0.0);
    double h5 = renyi_entropy(d, 0.5);
    double h1 = renyi_entropy(d, 1.0);
    CHECK(h0 >= h5 - 1e-12);
    CHECK(h5 >= h1 - 1e-12);
    CHECK(h0 <= std::log(static_cast<double>(n)) + 1e-12);
    // strictly non-uniform draws should be strictly ordered
    CHECK(h5 < std::log(static_cast<double>(n)) - 1e-9);
  }
  Eigen::VectorXd u = Eigen::VectorXd::Constant(6, 1.0 / 6);
  CHECK(renyi_entropy(u, 0.5) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("rejects malformed inputs") {
  Eigen::VectorXd bad(2);
  bad << 0.7, 0.4;
  CHECK_THROWS_AS(renyi_entropy(bad, 0.5), std::invalid_argument);
  Eigen::VectorXd neg(2);
  neg << 1.2, -0.2;
  CHECK_THROWS_AS(renyi_entropy(neg, 0.5), std::invalid_argument);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(2, 0.5);
  CHECK_THROWS_AS(renyi_entropy(u, 1.5), std::invalid_argument);
}

TEST_CASE("surrogate reward values") {
  CHECK(surrogate_reward(0.04, 0.5) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(surrogate_reward(std::exp(-2.0), 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(surrogate_reward(0.0, 0.3) == doctest::Approx(100.0));
  CHECK(surrogate_reward(0.0, 1.0, 7.5) == doctest::Approx(7.5));
  CHECK(surrogate_reward(1e-9, 0.5) == doctest::Approx(100.0));  // capped
  CHECK_THROWS_AS(surrogate_reward(-0.1, 0.5), std::invalid_argument);
}

TEST_CASE("surrogate reward is nonincreasing in the density") {
  for (double a : {0.0, 0.3, 0.5, 0.9, 1.0}) {
    double prev = surrogate_reward(0.0, a);
    for (double p : {1e-6, 1e-4, 0.01, 0.1, 0.3, 0.7, 1.0}) {
      double r = surrogate_reward(p, a);
      CHECK(r <= prev + 1e-12);
      prev = r;
    }
  }
}

TEST_CASE("uniform coupon values are n times the harmonic number") {
  for (int n = 2; n <= 10; ++n) {
    Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / n);
    double expect = n * harmonic(n);
    auto ie = coupon_collector(u, CouponMethod::inclusion_exclusion);
    auto quad = coupon_collector(u, CouponMethod::quadrature);
    CHECK(std::abs(ie.value - expect) < 1e-6);
    CHECK(std::abs(quad.value - expect) < 1e-6);
  }
  Eigen::VectorXd two = Eigen::VectorXd::Constant(2, 0.5);
  CHECK(coupon_collector(two, CouponMethod::inclusion_exclusion).value ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("quadrature agrees with inclusion-exclusion") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + rng.uniform_int(9);
    Eigen::VectorXd d = random_simplex(rng, n);
    double ie = coupon_collector(d, CouponMethod::inclusion_exclusion).value;
    double quad = coupon_collector(d, CouponMethod::quadrature).value;
    CHECK(std::abs(quad - ie) / ie < 1e-6);
  }
}

TEST_CASE("monte carlo covers the exact value") {
  Eigen::VectorXd d(4);
  d << 0.4, 0.3, 0.2, 0.1;
  double exact = coupon_collector(d, CouponMethod::inclusion_exclusion).value;
  CouponOptions opts;
  opts.mc_runs = 100000;
  opts.seed = 5;
  auto mc = coupon_collector(d, CouponMethod::monte_carlo, opts);
  CHECK(mc.std_error > 0.0);
  CHECK(std::abs(mc.value - exact) < 4.0 * mc.std_error);
}

TEST_CASE("zero entries make the collector infinite") {
  Eigen::VectorXd d(3);
  d << 0.5, 0.5, 0.0;
  for (auto m : {CouponMethod::quadrature, CouponMethod::inclusion_exclusion})
    CHECK(std::isinf(coupon_collector(d, m).value));
}

TEST_CASE("inclusion-exclusion refuses large supports") {
  Eigen::VectorXd d = Eigen::VectorXd::Constant(21, 1.0 / 21);
  CHECK_THROWS_AS(coupon_collector(d, CouponMethod::inclusion_exclusion),
                  std::invalid_argument);
}

TEST_CASE("uniform minimizes the collector") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 2 + rng.uniform_int(7);
    Eigen::VectorXd d = random_simplex(rng, n);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / n);
    double gd = coupon_collector(d, CouponMethod::inclusion_exclusion).value;
    double gu = coupon_collector(u, CouponMethod::inclusion_exclusion).value;
    CHECK(gd >= gu - 1e-9);
  }
}

TEST_CASE("collector is permutation invariant") {
  Rng rng(29);
  Eigen::VectorXd d = random_simplex(rng, 6);
  double base = coupon_collector(d, CouponMethod::quadrature).value;
  std::vector<double> v(d.data(), d.data() + 6);
  std::sort(v.begin(), v.end());
  do {
    Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(v.data(), 6);
    CHECK(coupon_collector(p, CouponMethod::quadrature).value ==
          doctest::Approx(base).epsilon(1e-9));
  } while (std::next_permutation(v.begin(), v.end()) && v[0] != d[0]);
}

TEST_CASE("ten-cell reference distribution") {
  // Flattened reference occupancy of the five-state chain example.
  Eigen::VectorXd d(10);
  d << 0.107, 0.226, 0.062, 0.162, 0.047, 0.113, 0.045, 0.067, 0.065, 0.106;
  d /= d.sum();  // printed table rounds to 1.000
  double g = coupon_collector(d, CouponMethod::inclusion_exclusion).value;
  CHECK(std::abs(g - 43.14) < 0.05);
  CHECK(coupon_collector(d, CouponMethod::quadrature).value ==
        doctest::Approx(g).epsilon(1e-8));
}

TEST_CASE("contour grid counts and center point") {
  auto rows = contour_grid(2, ContourObjective::renyi, 0.5);
  CHECK(rows.size() == 6);

  auto fine = contour_grid(3, ContourObjective::renyi, 0.5);
  CHECK(fine.size() == 10);  // (k+1)(k+2)/2
  bool found_center = false;
  for (const auto& r : fine) {
    if (std::abs(r.d[0] - 1.0 / 3) < 1e-12 && std::abs(r.d[1] - 1.0 / 3) < 1e-12) {
      found_center = true;
      CHECK(r.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    }
  }
  CHECK(found_center);
  CHECK_THROWS_AS(contour_grid(1, ContourObjective::renyi), std::invalid_argument);
}

TEST_CASE("contour grid flags the boundary and orders the interior") {
  auto rows = contour_grid(10, ContourObjective::coupon);
  CHECK(rows.size() == 66);
  double skewed = 0.0, balanced = 0.0;
  int infinite = 0;
  for (const auto& r : rows) {
    if (std::isinf(r.value)) ++infinite;
    if (std::abs(r.d[0] - 0.8) < 1e-12 && std::abs(r.d[1] - 0.1) < 1e-12)
      skewed = r.value;
    if (std::abs(r.d[0] - 0.4) < 1e-12 && std::abs(r.d[1] - 0.3) < 1e-12)
      balanced = r.value;
  }
  CHECK(infinite == 30);  // 3 edges of 11 points, corners shared
  CHECK(skewed > balanced);
  CHECK(balanced > 0.0);
}

}  // TEST_SUITE
