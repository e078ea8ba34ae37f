#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace rfx {

inline constexpr double kSupportEps = 1e-12;
inline constexpr double kDefaultRewardCap = 100.0;

// Throws std::invalid_argument unless d is a probability vector
// (entries >= 0, sum within 1e-9 of 1).
void validate_simplex(const Eigen::VectorXd& d);

// Renyi entropy of order alpha in [0,1], in nats. alpha = 0 counts the
// support (entries above kSupportEps); alpha = 1 is Shannon with the
// 0 log 0 := 0 convention.
double renyi_entropy(const Eigen::VectorXd& d, double alpha);

// Density-to-reward transform: p^(alpha-1) for alpha < 1, -log p at
// alpha = 1, both clipped at `cap`. p = 0 maps to the cap.
double surrogate_reward(double p, double alpha, double cap = kDefaultRewardCap);

enum class CouponMethod { quadrature, inclusion_exclusion, monte_carlo };

struct CouponOptions {
  double tail_tol = 1e-10;   // quadrature truncation budget
  long mc_runs = 100000;
  std::uint64_t seed = 0;
};

struct CouponResult {
  double value = 0.0;
  double std_error = 0.0;  // only meaningful for monte_carlo
};

// Expected number of i.i.d. draws from d until every cell has appeared.
// Any entry <= 0 makes the answer infinite.
CouponResult coupon_collector(const Eigen::VectorXd& d, CouponMethod method,
                              const CouponOptions& opts = {});

// Convenience: quadrature value only.
double coupon_collector_value(const Eigen::VectorXd& d);

enum class ContourObjective { coupon, renyi };

struct ContourRow {
  std::vector<double> d;
  double value = 0.0;  // +inf on the boundary for the coupon objective
};

// All points of the simplex lattice {i/k} with n coordinates (n = 3 by
// default), evaluated under the chosen objective. Rows are emitted in
// lexicographic order of the first n-1 coordinates.
std::vector<ContourRow> contour_grid(int k, ContourObjective objective,
                                     double alpha = 0.5, int n = 3);

}  // namespace rfx
