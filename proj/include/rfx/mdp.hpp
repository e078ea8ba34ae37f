#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfx {

struct ValidationIssue {
  std::string message;
  int s = -1;
  int a = -1;
  int h = -1;  // -1 for discounted models
  double row_sum = 0.0;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationIssue issue;
  explicit ValidationError(ValidationIssue is)
      : std::runtime_error(is.message), issue(std::move(is)) {}
};

// Raised when gamma = 1 and the policy-induced chain has no unique
// stationary distribution (reducible or otherwise degenerate).
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Controlled Markov process with discount gamma in (0,1]. Transitions are
// stored flat, row-major [s][a][s'].
struct DiscountedCmp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 1.0;
  std::vector<double> transition;
  std::vector<double> init;

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  const double* row(int s, int a) const {
    return &transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states];
  }
  int n_pairs() const { return n_states * n_actions; }
};

// Finite-horizon MDP with one transition tensor per step h = 1..H.
// Step h's tensor governs the move from step h to h+1 (the last one is
// carried for uniformity but nothing after step H is ever reached).
struct EpisodicMdp {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;
  std::vector<std::vector<double>> transition_per_step;
  std::vector<double> init;

  double p(int h, int s, int a, int s2) const {
    return transition_per_step[h][(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  const double* row(int h, int s, int a) const {
    return &transition_per_step[h][(static_cast<std::size_t>(s) * n_actions + a) * n_states];
  }
  int n_pairs() const { return n_states * n_actions; }
};

// Stationary stochastic policy, softmax over per-state logits. Rows of
// probs() are strictly positive by construction.
struct TabularPolicy {
  Eigen::MatrixXd logits;  // S x A

  static TabularPolicy uniform(int n_states, int n_actions) {
    TabularPolicy p;
    p.logits = Eigen::MatrixXd::Zero(n_states, n_actions);
    return p;
  }
  // Logits = log of clamped probabilities; rows are renormalized by the
  // softmax so slightly unnormalized inputs are tolerated.
  static TabularPolicy from_probs(const Eigen::MatrixXd& probs);

  Eigen::MatrixXd probs() const;
  int n_states() const { return static_cast<int>(logits.rows()); }
  int n_actions() const { return static_cast<int>(logits.cols()); }
};

struct NonStationaryPolicy {
  std::vector<Eigen::MatrixXd> logits;  // H entries, each S x A

  static NonStationaryPolicy uniform(int horizon, int n_states, int n_actions) {
    NonStationaryPolicy p;
    p.logits.assign(horizon, Eigen::MatrixXd::Zero(n_states, n_actions));
    return p;
  }
  Eigen::MatrixXd probs(int h) const;  // h is 0-based here
  int horizon() const { return static_cast<int>(logits.size()); }
};

// Distribution over state-action pairs (or states when state_only). Stored
// flat with index s * n_actions + a.
struct OccupancyMeasure {
  int n_states = 0;
  int n_actions = 0;
  bool state_only = false;
  Eigen::VectorXd w;

  double at(int s, int a) const { return w[s * n_actions + a]; }
  double at(int s) const { return w[s]; }
  double sum() const { return w.sum(); }
};

std::optional<ValidationIssue> check(const DiscountedCmp& m);
std::optional<ValidationIssue> check(const EpisodicMdp& m);
void validate(const DiscountedCmp& m);  // throws ValidationError
void validate(const EpisodicMdp& m);

// Pair-to-pair transition matrix of the chain induced by pi:
// M[(s,a),(s',a')] = P(s'|s,a) * pi(a'|s').
Eigen::MatrixXd induced_chain(const DiscountedCmp& m, const TabularPolicy& pi);
Eigen::MatrixXd induced_chain(const DiscountedCmp& m, const Eigen::MatrixXd& probs);

// Discounted state-action visitation distribution. For gamma < 1 solves
// d = (1-gamma) e + gamma M^T d exactly; for gamma = 1 returns the unique
// stationary distribution of the induced chain (throws SingularSystemError
// when it is not unique). `start` pins the t=0 pair instead of mu x pi.
OccupancyMeasure occupancy(const DiscountedCmp& m, const TabularPolicy& pi,
                           std::optional<std::pair<int, int>> start = std::nullopt);

// Same, from an explicit action-probability matrix (rows may contain exact
// zeros, unlike softmax policies).
OccupancyMeasure occupancy(const DiscountedCmp& m, const Eigen::MatrixXd& probs,
                           std::optional<std::pair<int, int>> start = std::nullopt);

// Visitation distributions started from every pair at once: column (s,a)
// equals occupancy(m, pi, {s,a}). One factorization, n_pairs solves.
Eigen::MatrixXd occupancy_all_starts(const DiscountedCmp& m, const TabularPolicy& pi);

OccupancyMeasure state_marginal(const OccupancyMeasure& d);

// Exact d_h under a non-stationary policy, h in 1..H.
OccupancyMeasure episodic_step_distribution(const EpisodicMdp& m,
                                            const NonStationaryPolicy& pi, int h);

// Conditional pi(a|s) = d(s,a)/d(s); uniform where the state marginal
// vanishes.
TabularPolicy policy_from_occupancy(const OccupancyMeasure& d);

// max over (non-stationary) policies of d_h(s,a). The action at step h is
// free, so this equals the best achievable P(s_h = s).
double max_reach(const EpisodicMdp& m, int s, int a, int h);

}  // namespace rfx
