#pragma once

#include "rfx/mdp.hpp"
#include "rfx/rng.hpp"
#include "rfx/solvers.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace rfx {

// One observed transition. h is the 1-based step index for episodic data
// and -1 for discounted (geometric-rollout) data.
struct TransitionRecord {
  int s = 0;
  int a = 0;
  int s2 = 0;
  int h = -1;
};

struct TransitionDataset {
  std::vector<TransitionRecord> records;
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;      // 0 marks a discounted dataset
  double gamma = 0.0;   // rollout discount (discounted datasets only)
  std::string source;   // description of the generating policy
  long n_trajectories = 0;
  std::uint64_t seed = 0;
  // Episodic collection only: how often each mixture member was drawn.
  std::vector<long> selection_counts;

  bool episodic() const { return horizon > 0; }
  long size() const { return static_cast<long>(records.size()); }
};

// Uniform mixture over non-stationary policies. labels records which
// maximizer produced each entry (the maximizer set is not unique).
struct PolicyMixture {
  std::vector<NonStationaryPolicy> policies;
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(policies.size()); }
};

// Count-based transition model. One slab for discounted data, one per step
// for episodic data. Estimated rows exist only where a pair was observed;
// asking for an unseen row is an error rather than a silent default.
struct EmpiricalModel {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;  // 0 marks a stationary (discounted) model
  double gamma = 0.0;
  std::vector<Eigen::MatrixXd> transition_counts;  // per slab, (S*A) x S
  std::vector<Eigen::MatrixXd> pair_counts;        // per slab, S x A

  int n_slabs() const { return static_cast<int>(pair_counts.size()); }
  // h is 1-based for episodic models and ignored for stationary ones.
  bool seen(int h, int s, int a) const;
  double count(int h, int s, int a) const;
  double p_hat(int h, int s, int a, int s2) const;  // throws on unseen pairs
  double total_count() const;
};

// Reward table, stationary r(s,a) or per-step r[h](s,a).
struct RewardFn {
  std::vector<Eigen::MatrixXd> table;  // one entry, or horizon entries

  static RewardFn stationary(Eigen::MatrixXd r);
  static RewardFn per_step(std::vector<Eigen::MatrixXd> r);
  static RewardFn constant(int n_states, int n_actions, double value);
  // Indicator reward: 1 on the given pair, 0 elsewhere.
  static RewardFn single_pair(int n_states, int n_actions, int s, int a);

  bool is_stationary() const { return table.size() == 1; }
  int steps() const { return static_cast<int>(table.size()); }
  const Eigen::MatrixXd& at_step(int h) const {  // h 1-based
    return is_stationary() ? table[0] : table[h - 1];
  }
  double max_entry() const;
  // Theory mode restricts rewards to [0,1]; throws when violated.
  void check_theory_range() const;
};

// The planning-phase sample bound diverges as the entropy order approaches
// one; callers must pick alpha strictly below 1.
class AlphaOneDivergence : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Geometric-termination rollouts under a stationary policy. Every recorded
// transition carries its sampled successor. When max_records > 0 collection
// stops at exactly that many records (possibly mid-trajectory); otherwise
// n_trajectories full rollouts are taken.
TransitionDataset collect_dataset(const DiscountedCmp& env, const TabularPolicy& policy,
                                  long n_trajectories, Rng& rng, long max_records = 0);

// Episodic collection: n_trajectories episodes of exactly horizon records,
// each under a policy drawn uniformly from the mixture.
TransitionDataset collect_dataset(const EpisodicMdp& env, const PolicyMixture& mixture,
                                  long n_trajectories, Rng& rng);

// Exact counting. Estimated transition rows are ratios of integer counts.
EmpiricalModel estimate_model(const TransitionDataset& dataset);

// Infinite-data limit: a model whose estimated rows equal the true
// transition probabilities, with every pair marked seen once.
EmpiricalModel exact_model(const DiscountedCmp& env);
EmpiricalModel exact_model(const EpisodicMdp& env);

enum class PlanMethod { value_iteration, npg, batch_constrained };

struct PlanOptions {
  // Unseen pairs contribute value 0 when pessimistic (the default); the
  // optimistic variant assigns the largest value any reward entry allows.
  bool optimistic_unseen = false;
  double gamma = -1.0;     // <0 uses the model's recorded discount
  double span_tol = 1e-10; // discounted value-iteration stopping span
  long max_sweeps = 2000000;
  double epsilon = 0.05;   // npg target accuracy; drives the schedule
  double eta = 0.0;        // npg step size; 0 derives sqrt(log A / (H T))
  long iters = 0;          // npg iteration count; 0 derives 4 H^3 log A / eps^2
  double n_min = 1.0;      // batch-constrained visit threshold
};

struct PlanResult {
  bool episodic = false;
  TabularPolicy policy;           // filled for stationary models
  NonStationaryPolicy per_step;   // filled for episodic models
  double j_hat = 0.0;             // planned policy's value on the empirical model
  std::string method;
  long iterations = 0;
};

PlanResult plan(const EmpiricalModel& model, const RewardFn& reward,
                PlanMethod method, const PlanOptions& opts = {});

// Exact policy evaluation on the true environment, never on estimates.
// Discounted J is mu' (I - gamma P_pi)^{-1} r_pi, without the (1 - gamma)
// normalization used for occupancies.
double evaluate_policy(const DiscountedCmp& env, const TabularPolicy& policy,
                       const RewardFn& reward);
double evaluate_policy(const EpisodicMdp& env, const NonStationaryPolicy& policy,
                       const RewardFn& reward);

// Trajectories sufficient for epsilon-accurate planning with failure
// probability p: c (H^2 S A / eps)^{2(beta+1)} (H/A) log(SAH/(p eps)) with
// beta = alpha / (2 (1 - alpha)). The constant c is unknown; treat the
// output as an order-of-magnitude indicator.
double theoretical_sample_bound(int n_states, int n_actions, int horizon,
                                double epsilon, double p, double alpha,
                                double c = 1.0);

// One entropy-maximizing policy per step, solved by Frank-Wolfe on the
// step-h flow polytope. Ties among maximizers fall to the first found.
PolicyMixture exploratory_mixture(const EpisodicMdp& m, double alpha,
                                  const SolveOptions& opts = {});

struct SignificanceReport {
  double delta = 0.0;
  double alpha = 0.5;
  double bound = 0.0;        // S A H / delta^{alpha/(1-alpha)}
  double worst_ratio = 0.0;  // max over significant pairs; 0 when none exist
  long n_significant = 0;
  bool satisfied = true;
  int worst_s = -1;
  int worst_a = -1;
  int worst_h = -1;
};

// Checks max_reach(s,a,h) / mu_h(s,a) <= bound over delta-significant
// pairs, where mu_h uniformly mixes the step-h distributions of the given
// policies.
SignificanceReport significance_diagnostic(const EpisodicMdp& m,
                                           const PolicyMixture& mixture,
                                           double delta, double alpha);

}  // namespace rfx
