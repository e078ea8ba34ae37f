#pragma once

// Independent reference implementations the unit tests check the library
// against. Everything here is deliberately written the dumb slow way.

#include "rfx/mdp.hpp"
#include "rfx/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace oracles {

// Discounted occupancy by direct summation of the series
// (1-g) * sum_t g^t x_t, truncated once the remaining mass g^t < tol.
inline Eigen::VectorXd power_iteration_occupancy(const rfx::DiscountedCmp& m,
                                                 const rfx::TabularPolicy& pi,
                                                 double tol = 1e-14) {
  const int A = m.n_actions, n = m.n_pairs();
  Eigen::MatrixXd M = rfx::induced_chain(m, pi);
  Eigen::MatrixXd P = pi.probs();
  Eigen::VectorXd x(n);
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < A; ++a) x[s * A + a] = m.init[s] * P(s, a);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  double scale = 1.0 - m.gamma;
  double mass = 1.0;
  while (mass > tol) {
    d += scale * mass * x;
    x = M.transpose() * x;
    mass *= m.gamma;
  }
  return d;
}

// Episodic step-h frequencies out of `episodes` Monte-Carlo rollouts,
// together with the pointwise standard errors.
struct McFrequencies {
  Eigen::VectorXd freq;
  Eigen::VectorXd se;
};

inline McFrequencies mc_step_frequency(const rfx::EpisodicMdp& m,
                                       const rfx::NonStationaryPolicy& pi, int h,
                                       long episodes, std::uint64_t seed) {
  rfx::Rng rng(seed);
  const int S = m.n_states, A = m.n_actions;
  std::vector<Eigen::MatrixXd> probs;
  for (int t = 0; t < m.horizon; ++t) probs.push_back(pi.probs(t));
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(S * A);
  for (long e = 0; e < episodes; ++e) {
    int s = rng.categorical(m.init.data(), S);
    int a = -1;
    for (int t = 1; t <= h; ++t) {
      a = rng.categorical(probs[t - 1].row(s).data(), A);
      if (t == h) break;
      s = rng.categorical(m.row(t - 1, s, a), S);
    }
    counts[s * A + a] += 1.0;
  }
  McFrequencies out;
  out.freq = counts / static_cast<double>(episodes);
  out.se.resize(S * A);
  for (int i = 0; i < S * A; ++i) {
    double p = out.freq[i];
    out.se[i] = std::sqrt(std::max(p * (1.0 - p), 1e-12) / episodes);
  }
  return out;
}

// Best probability of sitting at state s on step h, by enumerating every
// deterministic assignment of actions to (state, step) for steps 1..h-1.
inline double enumerate_max_reach(const rfx::EpisodicMdp& m, int s, int h) {
  const int S = m.n_states, A = m.n_actions;
  const int slots = S * (h - 1);
  long combos = 1;
  for (int i = 0; i < slots; ++i) combos *= A;
  double best = 0.0;
  for (long c = 0; c < combos; ++c) {
    std::vector<int> act(slots);
    long rem = c;
    for (int i = 0; i < slots; ++i) {
      act[i] = static_cast<int>(rem % A);
      rem /= A;
    }
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(m.init.data(), S);
    for (int t = 0; t < h - 1; ++t) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
      for (int st = 0; st < S; ++st) {
        if (x[st] == 0.0) continue;
        int a = act[t * S + st];
        for (int s2 = 0; s2 < S; ++s2) next[s2] += x[st] * m.p(t, st, a, s2);
      }
      x = next;
    }
    best = std::max(best, x[s]);
  }
  return best;
}

// Reference solution tables for the five-state chain exploration example
// (entropy order 1/2, near-undiscounted). Column j is state j; the policy
// rows are the two actions. These tables were generated with a discount of
// 0.99: they are not a stationary point of the induced chain (the inflow
// mismatch at the reset state is ~4e-3) but match the 0.99 occupancy to
// ~4e-4, so tests pin them at that discount.
inline rfx::TabularPolicy five_state_reference_policy() {
  Eigen::MatrixXd p(5, 2);
  p << 0.321, 0.679,
       0.276, 0.724,
       0.294, 0.706,
       0.401, 0.599,
       0.381, 0.619;
  return rfx::TabularPolicy::from_probs(p);
}

inline Eigen::MatrixXd five_state_reference_occupancy() {
  Eigen::MatrixXd d(5, 2);  // (state, action)
  d << 0.107, 0.226,
       0.062, 0.162,
       0.047, 0.113,
       0.045, 0.067,
       0.065, 0.106;
  return d;
}

constexpr double kFiveStateReferenceG = 43.14;
constexpr double kFiveStateReferenceGamma = 0.99;

}  // namespace oracles
