#pragma once

#include <deque>
#include <vector>

#include "rfx/mdp.hpp"
#include "rfx/rng.hpp"

namespace rfx {

// One sampled episode: aligned state/action sequences of equal length >= 1.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  int length() const { return static_cast<int>(states.size()); }
};

using Batch = std::vector<Trajectory>;

// Per-position rewards for one batch, aligned with its trajectories.
using BatchRewards = std::vector<std::vector<double>>;

// Smoothed visit counts standing in for a learned density model. The
// estimate is a strict probability distribution whenever kappa > 0.
struct CountDensity {
  Eigen::MatrixXd counts;  // states x actions
  double kappa = 0.5;
  double total = 0.0;
  double p(int s, int a) const {
    return (counts(s, a) + kappa) / (total + kappa * counts.size());
  }
  Eigen::VectorXd flat_probs() const;  // pair-major, sums to one
};

struct TabularValueFn {
  Eigen::VectorXd v;
  static TabularValueFn zeros(int n_states) {
    return TabularValueFn{Eigen::VectorXd::Zero(n_states)};
  }
};

struct TrainerConfig {
  double alpha = 0.5;
  double eta = 1e-4;      // weight of the policy-entropy bonus
  double lambda = 0.95;   // eligibility mixing for targets and advantages
  int trunc_steps = 15;   // truncation depth of the return estimators
  double clip_eps = 0.2;
  double kappa = 0.5;     // count smoothing
  int traj_per_iter = 10;
  int buffer_iters = 10;  // how many iterations the buffer retains
  double gamma = 0.995;
  double lr_policy = 4e-3;
  double lr_value = 1e-3;
  int ppo_epochs = 10;
  double reward_cap = 100.0;
  int iterations = 100;
  unsigned long seed = 0;
  bool normalize_advantages = true;  // zero mean, unit variance per batch
  bool adaptive_optimizer = false;   // per-update adaptive scaling vs plain steps
  double kl_ceiling = 0.5;           // logged guardrail, never enforced
  int mc_entropy_every = 0;          // sampled-entropy cadence; 0 disables
};

// Sliding window over the most recent iteration batches, with the reward
// labels stored alongside so the whole window can be relabeled at once.
class ReplayBuffer {
 public:
  struct Entry {
    Batch batch;
    BatchRewards rewards;
  };

  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}

  void push(Batch batch);
  // Rewrites every stored reward from the given density estimate.
  void relabel(const CountDensity& density, double alpha, double cap);

  int size() const { return static_cast<int>(entries_.size()); }
  Entry& newest() { return entries_.back(); }
  const Entry& newest() const { return entries_.back(); }
  const std::deque<Entry>& entries() const { return entries_; }

 private:
  std::deque<Entry> entries_;
  int capacity_;
};

// Samples m episodes from the start distribution; after each recorded pair
// the episode ends with probability 1 - gamma. Requires gamma < 1.
Batch rollout_geometric(const DiscountedCmp& env, const TabularPolicy& policy,
                        int m, Rng& rng);

CountDensity fit_density(const Batch& batch, int n_states, int n_actions,
                         double kappa);

// Truncated lambda-weighted value targets, one per trajectory position.
// Returns within a trajectory are undiscounted; the bootstrap lands on the
// last recorded state when the lookahead runs off the end.
BatchRewards td_lambda_targets(const Batch& batch, const BatchRewards& rewards,
                               const TabularValueFn& v, double lambda,
                               int trunc_steps);

// Advantage of each position: its lambda target minus the state's value.
BatchRewards gae_advantages(const Batch& batch, const BatchRewards& rewards,
                            const TabularValueFn& v, double lambda,
                            int trunc_steps);

// Full-batch gradient descent on the mean squared error against the targets.
// Returns the final loss.
double fit_value(TabularValueFn& v, const std::vector<int>& states,
                 const std::vector<double>& targets, double lr, int epochs);

// One element of the clipped-ratio objective.
double ppo_objective_term(double ratio, double advantage, double clip_eps);

struct PpoReport {
  double kl = 0.0;          // mean KL from the pre-update policy
  double mean_ratio = 1.0;  // diagnostic, averaged over the final epoch
};

// Clipped-ratio policy update on one batch: rewards come from the density
// estimate, advantages from the lambda targets, plus an entropy bonus
// weighted by eta. The pre-update policy is snapshotted on entry.
PpoReport ppo_update(TabularPolicy& policy, const Batch& batch,
                     const CountDensity& density, const TabularValueFn& v,
                     const TrainerConfig& config);

struct IterationMetrics {
  int iter = 0;
  double exact_entropy = 0.0;
  double mc_entropy = 0.0;  // NaN on iterations where the cadence skips it
  double mean_traj_len = 0.0;
  double policy_kl = 0.0;
  double value_loss = 0.0;
};

struct TrainResult {
  TabularPolicy policy;
  TabularValueFn value;
  std::vector<IterationMetrics> metrics;
  Eigen::MatrixXd final_counts;  // visit counts behind the last density fit
};

// The sample-based exploration loop: rollout, estimate the density, relabel
// the buffer, refit values on the buffer, then update the policy on the
// newest batch.
TrainResult train(const DiscountedCmp& env, const TrainerConfig& config);

struct McProtocol {
  int n_traj = 1000;
  int groups = 50;      // support-size protocol only
  int group_size = 20;  // trajectories per group
  unsigned long seed = 0;
};

// Sampled entropy estimate: empirical pair distribution for orders 1 and
// one-half; for order zero, the mean log support size over trajectory groups.
double estimate_entropy_mc(const DiscountedCmp& env, const TabularPolicy& policy,
                           double alpha, const McProtocol& protocol);

}  // namespace rfx
