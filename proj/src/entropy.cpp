#include "rfx/entropy.hpp"

#include "rfx/rng.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rfx {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void validate_simplex(const Eigen::VectorXd& d) {
  if (d.size() < 1) throw std::invalid_argument("empty distribution");
  if (d.minCoeff() < 0.0) throw std::invalid_argument("negative probability entry");
  if (std::abs(d.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("probabilities sum to " + std::to_string(d.sum()));
}

double renyi_entropy(const Eigen::VectorXd& d, double alpha) {
  validate_simplex(d);
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("order outside [0,1]");
  if (alpha == 0.0) {
    int support = 0;
    for (int i = 0; i < d.size(); ++i)
      if (d[i] > kSupportEps) ++support;
    return std::log(static_cast<double>(support));
  }
  if (alpha == 1.0) {
    double h = 0.0;
    for (int i = 0; i < d.size(); ++i)
      if (d[i] > 0.0) h -= d[i] * std::log(d[i]);
    return h;
  }
  double z = 0.0;
  for (int i = 0; i < d.size(); ++i) z += std::pow(d[i], alpha);
  return std::log(z) / (1.0 - alpha);
}

double surrogate_reward(double p, double alpha, double cap) {
  if (p < 0.0) throw std::invalid_argument("negative density");
  if (cap <= 0.0) throw std::invalid_argument("cap must be positive");
  if (p == 0.0) return cap;
  double r = alpha == 1.0 ? -std::log(p) : std::pow(p, alpha - 1.0);
  return std::min(cap, r);
}

namespace {

double coupon_inclusion_exclusion(const Eigen::VectorXd& d) {
  const int n = static_cast<int>(d.size());
  if (n > 20) throw std::invalid_argument("inclusion-exclusion limited to n <= 20");
  const std::size_t total = std::size_t{1} << n;
  std::vector<double> sums(total, 0.0);
  double g = 0.0;
  for (std::size_t mask = 1; mask < total; ++mask) {
    std::size_t low = mask & (~mask + 1);
    sums[mask] = sums[mask ^ low] + d[std::countr_zero(low)];
    g += (std::popcount(mask) & 1 ? 1.0 : -1.0) / sums[mask];
  }
  return g;
}

// P(some cell still unseen after exposure time t) under the Poissonized
// collector; G is its integral over t >= 0.
double miss_probability(const Eigen::VectorXd& d, double t) {
  double prod = 1.0;
  for (int i = 0; i < d.size(); ++i) prod *= 1.0 - std::exp(-d[i] * t);
  return 1.0 - prod;
}

double adaptive_simpson(const Eigen::VectorXd& d, double a, double b, double fa,
                        double fm, double fb, double whole, double eps, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = miss_probability(d, lm), frm = miss_probability(d, rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(d, a, m, fa, flm, fm, left, eps * 0.5, depth - 1) +
         adaptive_simpson(d, m, b, fm, frm, fb, right, eps * 0.5, depth - 1);
}

double coupon_quadrature(const Eigen::VectorXd& d, double tail_tol) {
  const int n = static_cast<int>(d.size());
  // Cut once every cell's own tail integral e^(-d_i T)/d_i is negligible.
  double T = 0.0;
  for (int i = 0; i < n; ++i)
    T = std::max(T, std::log(n / (tail_tol * d[i])) / d[i]);
  // Doubling segments resolve the fast variation near zero without deep
  // recursion on the long flat tail.
  double g = 0.0;
  double a = 0.0, b = std::min(1.0, T);
  while (true) {
    double m = 0.5 * (a + b);
    double fa = miss_probability(d, a), fm = miss_probability(d, m),
           fb = miss_probability(d, b);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    g += adaptive_simpson(d, a, b, fa, fm, fb, whole, tail_tol, 48);
    if (b >= T) break;
    a = b;
    b = std::min(2.0 * b, T);
  }
  double tail = 0.0;
  for (int i = 0; i < n; ++i) tail += std::exp(-d[i] * T) / d[i];
  return g + tail;
}

CouponResult coupon_monte_carlo(const Eigen::VectorXd& d, long runs,
                                std::uint64_t seed) {
  const int n = static_cast<int>(d.size());
  Rng rng(seed);
  double sum = 0.0, sumsq = 0.0;
  std::vector<char> seen(n);
  for (long r = 0; r < runs; ++r) {
    std::fill(seen.begin(), seen.end(), 0);
    int missing = n;
    long draws = 0;
    while (missing > 0) {
      int i = rng.categorical(d.data(), n);
      ++draws;
      if (!seen[i]) {
        seen[i] = 1;
        --missing;
      }
    }
    sum += static_cast<double>(draws);
    sumsq += static_cast<double>(draws) * static_cast<double>(draws);
  }
  double mean = sum / runs;
  double var = std::max(0.0, sumsq / runs - mean * mean);
  return {mean, std::sqrt(var / runs)};
}

}  // namespace

CouponResult coupon_collector(const Eigen::VectorXd& d, CouponMethod method,
                              const CouponOptions& opts) {
  validate_simplex(d);
  if (d.minCoeff() <= 0.0) return {kInf, 0.0};
  switch (method) {
    case CouponMethod::inclusion_exclusion:
      return {coupon_inclusion_exclusion(d), 0.0};
    case CouponMethod::quadrature:
      return {coupon_quadrature(d, opts.tail_tol), 0.0};
    case CouponMethod::monte_carlo:
      return coupon_monte_carlo(d, opts.mc_runs, opts.seed);
  }
  throw std::logic_error("unreachable");
}

double coupon_collector_value(const Eigen::VectorXd& d) {
  return coupon_collector(d, CouponMethod::quadrature).value;
}

namespace {

void emit_points(int k, int n, int coord, int left, std::vector<double>& point,
                 ContourObjective objective, double alpha,
                 std::vector<ContourRow>& out) {
  if (coord == n - 1) {
    point[coord] = static_cast<double>(left) / k;
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(point.data(), n);
    ContourRow row;
    row.d = point;
    if (objective == ContourObjective::renyi) {
      row.value = renyi_entropy(d, alpha);
    } else {
      row.value = d.minCoeff() > 0.0 ? coupon_quadrature(d, 1e-10) : kInf;
    }
    out.push_back(std::move(row));
    return;
  }
  for (int i = 0; i <= left; ++i) {
    point[coord] = static_cast<double>(i) / k;
    emit_points(k, n, coord + 1, left - i, point, objective, alpha, out);
  }
}

}  // namespace

std::vector<ContourRow> contour_grid(int k, ContourObjective objective, double alpha,
                                     int n) {
  if (k < 2) throw std::invalid_argument("grid resolution must be at least 2");
  if (n < 1) throw std::invalid_argument("need at least one coordinate");
  std::vector<ContourRow> out;
  std::vector<double> point(n, 0.0);
  emit_points(k, n, 0, k, point, objective, alpha, out);
  return out;
}

}  // namespace rfx
