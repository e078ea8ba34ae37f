#include "rfx/gradients.hpp"

#include <cmath>

namespace rfx {

namespace {

constexpr double kTinyDensity = 1e-300;

// dH_alpha/dd for alpha in (0,1]; entries at structural zeros are clamped
// to stay finite (they only ever multiply zero visitation mass).
Eigen::VectorXd entropy_grad_in_density(const Eigen::VectorXd& d, double alpha) {
  const auto n = d.size();
  Eigen::VectorXd c(n);
  if (alpha == 1.0) {
    for (Eigen::Index i = 0; i < n; ++i)
      c[i] = -std::log(std::max(d[i], kTinyDensity)) - 1.0;
    return c;
  }
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) z += std::pow(std::max(d[i], 0.0), alpha);
  double pref = alpha / ((1.0 - alpha) * z);
  for (Eigen::Index i = 0; i < n; ++i)
    c[i] = pref * std::pow(std::max(d[i], kTinyDensity), alpha - 1.0);
  return c;
}

// Common assembly: E_{(s,a)~d}[grad log pi(a|s) * coef(s,a)] as a logit
// gradient. Rows sum to zero by construction.
Eigen::MatrixXd assemble_score_expectation(const Eigen::VectorXd& d,
                                           const Eigen::MatrixXd& P,
                                           const Eigen::MatrixXd& coef) {
  const int S = static_cast<int>(P.rows()), A = static_cast<int>(P.cols());
  Eigen::MatrixXd g(S, A);
  for (int s = 0; s < S; ++s) {
    double mixed = 0.0;
    for (int a = 0; a < A; ++a) mixed += d[s * A + a] * coef(s, a);
    for (int b = 0; b < A; ++b) g(s, b) = d[s * A + b] * coef(s, b) - P(s, b) * mixed;
  }
  return g;
}

void check_alpha(double alpha) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("gradient needs an order in (0, 1]");
}

}  // namespace

PolicyGradient entropy_gradient_exact(const DiscountedCmp& m, const TabularPolicy& pi,
                                      double alpha) {
  check_alpha(alpha);
  const int S = m.n_states, A = m.n_actions, n = m.n_pairs();
  Eigen::MatrixXd P = pi.probs();
  Eigen::MatrixXd M = induced_chain(m, P);
  OccupancyMeasure d = occupancy(m, P);
  Eigen::VectorXd c = entropy_grad_in_density(d.w, alpha);

  // Adjoint weights: the directional response of H to injecting visitation
  // mass at a pair. At gamma = 1 the resolvent is replaced by the
  // fundamental matrix of the stationary chain.
  Eigen::VectorXd w;
  if (m.gamma < 1.0) {
    w = (Eigen::MatrixXd::Identity(n, n) - m.gamma * M).partialPivLu().solve(c);
  } else {
    Eigen::MatrixXd fundamental =
        Eigen::MatrixXd::Identity(n, n) - M +
        Eigen::VectorXd::Ones(n) * d.w.transpose();
    w = fundamental.partialPivLu().solve(c);
  }

  PolicyGradient out;
  out.g.resize(S, A);
  for (int s = 0; s < S; ++s) {
    double ds = 0.0;
    for (int a = 0; a < A; ++a) ds += d.w[s * A + a];
    double wbar = 0.0;
    for (int a = 0; a < A; ++a) wbar += P(s, a) * w[s * A + a];
    for (int b = 0; b < A; ++b) out.g(s, b) = ds * P(s, b) * (w[s * A + b] - wbar);
  }
  return out;
}

PolicyGradient renyi_policy_gradient(const DiscountedCmp& m, const TabularPolicy& pi,
                                     double alpha, GradientMode mode,
                                     const GradientOptions& opts) {
  check_alpha(alpha);
  if (m.gamma >= 1.0)
    throw GammaOneUnsupported(
        "visitation-form gradient is defined for gamma < 1; "
        "use the stationary-chain gradient instead");
  const int S = m.n_states, A = m.n_actions, n = m.n_pairs();
  Eigen::MatrixXd P = pi.probs();
  OccupancyMeasure d = occupancy(m, P);
  Eigen::MatrixXd D = occupancy_all_starts(m, pi);  // column = started pair

  PolicyGradient out;
  if (mode == GradientMode::full) {
    // Per-pair payoff c, then coef(s,a) = <started visitation, c> routed
    // through the state marginal (actions resampled from the current
    // policy) plus the local c(s,a) term.
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i)
      c[i] = alpha == 1.0 ? -std::log(std::max(d.w[i], kTinyDensity))
                          : std::pow(std::max(d.w[i], kTinyDensity), alpha - 1.0);
    Eigen::VectorXd cbar = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) cbar[s] += P(s, a) * c[s * A + a];

    Eigen::MatrixXd coef(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double inner = 0.0;
        for (int x = 0; x < S; ++x) {
          double mcol = 0.0;
          for (int b = 0; b < A; ++b) mcol += D(x * A + b, s * A + a);
          inner += mcol * cbar[x];
        }
        coef(s, a) = inner / (1.0 - m.gamma) + c[s * A + a];
      }
    if (alpha < 1.0) coef *= alpha / (1.0 - alpha);
    out.g = assemble_score_expectation(d.w, P, coef);
    return out;
  }

  // Approximate mode: score expectation of the capped surrogate return,
  // plus the weighted policy-entropy bonus.
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = surrogate_reward(d.w[i], alpha, opts.cap);
  Eigen::MatrixXd q(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      q(s, a) = D.col(s * A + a).dot(r) / (1.0 - m.gamma);
  Eigen::MatrixXd g = assemble_score_expectation(d.w, P, q);

  Eigen::VectorXd ds = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) ds[s] += d.w[s * A + a];
  out.g = g + opts.eta * policy_entropy_semi_gradient(ds, P).g;
  return out;
}

PolicyGradient finite_difference_gradient(const DiscountedCmp& m,
                                          const TabularPolicy& pi, double alpha,
                                          double step) {
  if (step <= 0.0) throw std::invalid_argument("difference step must be positive");
  const int S = pi.n_states(), A = pi.n_actions();
  PolicyGradient out;
  out.g.resize(S, A);
  TabularPolicy probe = pi;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double saved = probe.logits(s, a);
      probe.logits(s, a) = saved + step;
      double hi = renyi_entropy(occupancy(m, probe).w.cwiseMax(0.0), alpha);
      probe.logits(s, a) = saved - step;
      double lo = renyi_entropy(occupancy(m, probe).w.cwiseMax(0.0), alpha);
      probe.logits(s, a) = saved;
      out.g(s, a) = (hi - lo) / (2.0 * step);
    }
  return out;
}

PolicyGradient policy_entropy_semi_gradient(const Eigen::VectorXd& state_weights,
                                            const Eigen::MatrixXd& probs) {
  const int S = static_cast<int>(probs.rows()), A = static_cast<int>(probs.cols());
  PolicyGradient out;
  out.g.resize(S, A);
  for (int s = 0; s < S; ++s) {
    double h = 0.0;
    for (int a = 0; a < A; ++a) h -= probs(s, a) * std::log(probs(s, a));
    for (int b = 0; b < A; ++b)
      out.g(s, b) = state_weights[s] * probs(s, b) * (-std::log(probs(s, b)) - h);
  }
  return out;
}

double cosine_similarity(const PolicyGradient& a, const PolicyGradient& b) {
  double na = a.g.norm(), nb = b.g.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return (a.g.array() * b.g.array()).sum() / (na * nb);
}

double fitted_scale(const PolicyGradient& a, const PolicyGradient& b) {
  double denom = b.g.squaredNorm();
  if (denom == 0.0) return 0.0;
  return (a.g.array() * b.g.array()).sum() / denom;
}

}  // namespace rfx
