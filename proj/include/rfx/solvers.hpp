#pragma once

#include "rfx/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rfx {

enum class SolveMethod { gradient_ascent, frank_wolfe };

struct SolveOptions {
  int max_iters = 10000;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  int restarts = 5;
};

struct OptimizerReport {
  TabularPolicy policy;
  NonStationaryPolicy step_policy;  // filled for episodic solves
  bool episodic = false;
  double objective = 0.0;  // final entropy (or G for the minimizer)
  int iterations = 0;
  std::vector<double> trace;
  std::string method;
  bool converged = true;
  double used_alpha = 0.0;  // order actually optimized (0 is proxied by 0.01)
};

// Maximizes H_alpha of the discounted (or stationary, at gamma = 1)
// state-action occupancy over softmax policies. Gradient ascent works for
// any gamma in (0,1]; Frank-Wolfe iterates on the occupancy polytope and
// needs gamma < 1. Orders below 0.01 are lifted to 0.01 and reported via
// used_alpha.
OptimizerReport maximize_entropy(const DiscountedCmp& m, double alpha,
                                 SolveMethod method, const SolveOptions& opts = {});

// Episodic variant: maximizes H_alpha(d_h) over non-stationary policies.
// Frank-Wolfe runs on per-step flow tensors so mixtures stay realizable.
OptimizerReport maximize_entropy_step(const EpisodicMdp& m, int h, double alpha,
                                      SolveMethod method,
                                      const SolveOptions& opts = {});

struct MinimizeGOptions {
  double grid_step = 0.01;
  int refine_rounds = 40;
};

// Direct minimization of the coupon-collector objective of the occupancy:
// dense grid over per-state action simplices followed by pattern-search
// refinement. Only for tiny policy spaces (S*(A-1) <= 8).
OptimizerReport minimize_G(const DiscountedCmp& m, const MinimizeGOptions& opts = {});

}  // namespace rfx
