#pragma once

#include "rfx/entropy.hpp"
#include "rfx/mdp.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace rfx {

// Gradient with respect to policy logits; rows live in the softmax tangent
// space, so each state's row sums to zero.
struct PolicyGradient {
  Eigen::MatrixXd g;  // S x A
};

class GammaOneUnsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GradientMode { full, approximate };

struct GradientOptions {
  double eta = 1e-4;               // entropy-bonus weight (approximate mode)
  double cap = kDefaultRewardCap;  // surrogate-reward cap (approximate mode)
};

// Occupancy-entropy gradient in the literal two-term visitation form,
// evaluated exactly from started occupancies. Requires gamma < 1. For
// alpha < 1 the result carries the alpha/(1-alpha) prefactor and is a
// positive multiple of the true gradient (the dropped normalizer is the
// power sum); at alpha = 1 it is the true gradient. `approximate` swaps
// the second term for the policy-entropy bonus and routes the first term
// through the capped surrogate reward.
PolicyGradient renyi_policy_gradient(const DiscountedCmp& m, const TabularPolicy& pi,
                                     double alpha, GradientMode mode,
                                     const GradientOptions& opts = {});

// True gradient of H_alpha(occupancy(m, pi)) via one adjoint solve;
// supports gamma = 1 through the fundamental matrix of the induced chain.
// This is the workhorse the solvers use.
PolicyGradient entropy_gradient_exact(const DiscountedCmp& m, const TabularPolicy& pi,
                                      double alpha);

// Central differences of H_alpha(occupancy(.)) in every logit coordinate.
PolicyGradient finite_difference_gradient(const DiscountedCmp& m,
                                          const TabularPolicy& pi, double alpha,
                                          double step);

// Gradient of sum_s weight(s) * H_1(pi(.|s)) with the weights held fixed.
PolicyGradient policy_entropy_semi_gradient(const Eigen::VectorXd& state_weights,
                                            const Eigen::MatrixXd& probs);

double cosine_similarity(const PolicyGradient& a, const PolicyGradient& b);

// Least-squares scale fitting a onto b: <a,b>/<b,b>.
double fitted_scale(const PolicyGradient& a, const PolicyGradient& b);

}  // namespace rfx
