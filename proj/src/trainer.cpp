#include "rfx/trainer.hpp"

#include "rfx/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace rfx {

namespace {

int sample_row(Rng& rng, const Eigen::MatrixXd& probs, int row) {
  double u = rng.uniform();
  double acc = 0.0;
  int last = static_cast<int>(probs.cols()) - 1;
  for (int a = 0; a < last; ++a) {
    acc += probs(row, a);
    if (u < acc) return a;
  }
  return last;
}

}  // namespace

Eigen::VectorXd CountDensity::flat_probs() const {
  Eigen::VectorXd out(counts.size());
  const int n_actions = static_cast<int>(counts.cols());
  for (int s = 0; s < counts.rows(); ++s)
    for (int a = 0; a < n_actions; ++a) out[s * n_actions + a] = p(s, a);
  return out;
}

void ReplayBuffer::push(Batch batch) {
  Entry entry;
  entry.rewards.resize(batch.size());
  for (size_t j = 0; j < batch.size(); ++j)
    entry.rewards[j].assign(batch[j].states.size(), 0.0);
  entry.batch = std::move(batch);
  entries_.push_back(std::move(entry));
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

void ReplayBuffer::relabel(const CountDensity& density, double alpha, double cap) {
  for (Entry& entry : entries_)
    for (size_t j = 0; j < entry.batch.size(); ++j) {
      const Trajectory& traj = entry.batch[j];
      for (int k = 0; k < traj.length(); ++k)
        entry.rewards[j][k] =
            surrogate_reward(density.p(traj.states[k], traj.actions[k]), alpha, cap);
    }
}

Batch rollout_geometric(const DiscountedCmp& env, const TabularPolicy& policy,
                        int m, Rng& rng) {
  if (env.gamma < 0.0 || env.gamma >= 1.0)
    throw std::invalid_argument("geometric rollouts need a discount below one");
  Eigen::MatrixXd probs = policy.probs();
  const int S = env.n_states;
  Batch batch;
  batch.reserve(m);
  for (int j = 0; j < m; ++j) {
    Trajectory traj;
    int s = static_cast<int>(rng.categorical(env.init.data(), S));
    while (true) {
      int a = sample_row(rng, probs, s);
      traj.states.push_back(s);
      traj.actions.push_back(a);
      if (rng.uniform() < 1.0 - env.gamma) break;
      s = static_cast<int>(rng.categorical(env.row(s, a), S));
    }
    batch.push_back(std::move(traj));
  }
  return batch;
}

CountDensity fit_density(const Batch& batch, int n_states, int n_actions,
                         double kappa) {
  if (kappa <= 0.0) throw std::invalid_argument("smoothing must be positive");
  CountDensity density;
  density.counts = Eigen::MatrixXd::Zero(n_states, n_actions);
  density.kappa = kappa;
  for (const Trajectory& traj : batch)
    for (int k = 0; k < traj.length(); ++k)
      density.counts(traj.states[k], traj.actions[k]) += 1.0;
  density.total = density.counts.sum();
  if (density.total == 0.0) throw std::invalid_argument("empty batch");
  return density;
}

BatchRewards td_lambda_targets(const Batch& batch, const BatchRewards& rewards,
                               const TabularValueFn& v, double lambda,
                               int trunc_steps) {
  if (rewards.size() != batch.size())
    throw std::invalid_argument("rewards misaligned with batch");
  if (trunc_steps < 1) throw std::invalid_argument("truncation depth must be >= 1");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("lambda outside [0, 1]");
  BatchRewards targets(batch.size());
  for (size_t j = 0; j < batch.size(); ++j) {
    const Trajectory& traj = batch[j];
    const std::vector<double>& r = rewards[j];
    const int n = traj.length();
    if (static_cast<int>(r.size()) != n)
      throw std::invalid_argument("rewards misaligned with batch");
    std::vector<double> prefix(n + 1, 0.0);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + r[i];
    targets[j].resize(n);
    for (int k = 0; k < n; ++k) {
      // lookahead of p steps lands on position min(n, k+1+p) - 1; rewards up
      // to the position before it are summed and the value bootstraps there
      double acc = 0.0;
      double lam_pow = 1.0;
      double nstep = 0.0;
      for (int p = 1; p <= trunc_steps; ++p) {
        int land = std::min(n, k + 1 + p) - 1;
        nstep = prefix[land] - prefix[k] + v.v[traj.states[land]];
        if (p < trunc_steps) {
          acc += (1.0 - lambda) * lam_pow * nstep;
          lam_pow *= lambda;
        }
      }
      targets[j][k] = acc + lam_pow * nstep;
    }
  }
  return targets;
}

BatchRewards gae_advantages(const Batch& batch, const BatchRewards& rewards,
                            const TabularValueFn& v, double lambda,
                            int trunc_steps) {
  BatchRewards adv = td_lambda_targets(batch, rewards, v, lambda, trunc_steps);
  for (size_t j = 0; j < batch.size(); ++j)
    for (int k = 0; k < batch[j].length(); ++k)
      adv[j][k] -= v.v[batch[j].states[k]];
  return adv;
}

double fit_value(TabularValueFn& v, const std::vector<int>& states,
                 const std::vector<double>& targets, double lr, int epochs) {
  if (states.size() != targets.size())
    throw std::invalid_argument("states misaligned with targets");
  const size_t n = states.size();
  if (n == 0) return 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(v.v.size());
  for (int e = 0; e < epochs; ++e) {
    grad.setZero();
    for (size_t i = 0; i < n; ++i) grad[states[i]] += v.v[states[i]] - targets[i];
    v.v -= (lr / static_cast<double>(n)) * grad;
  }
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double err = v.v[states[i]] - targets[i];
    loss += err * err;
  }
  return loss / static_cast<double>(n);
}

double ppo_objective_term(double ratio, double advantage, double clip_eps) {
  double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

PpoReport ppo_update(TabularPolicy& policy, const Batch& batch,
                     const CountDensity& density, const TabularValueFn& v,
                     const TrainerConfig& config) {
  const int S = static_cast<int>(policy.logits.rows());
  const int A = static_cast<int>(policy.logits.cols());
  const Eigen::MatrixXd old_probs = policy.probs();

  BatchRewards rewards(batch.size());
  long n_pos = 0;
  for (size_t j = 0; j < batch.size(); ++j) {
    const Trajectory& traj = batch[j];
    rewards[j].resize(traj.length());
    for (int k = 0; k < traj.length(); ++k)
      rewards[j][k] = surrogate_reward(density.p(traj.states[k], traj.actions[k]),
                                       config.alpha, config.reward_cap);
    n_pos += traj.length();
  }
  if (n_pos == 0) return PpoReport{};

  BatchRewards adv =
      gae_advantages(batch, rewards, v, config.lambda, config.trunc_steps);
  if (config.normalize_advantages) {
    double mean = 0.0;
    for (const auto& row : adv)
      for (double x : row) mean += x;
    mean /= static_cast<double>(n_pos);
    double var = 0.0;
    for (const auto& row : adv)
      for (double x : row) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / static_cast<double>(n_pos));
    for (auto& row : adv)
      for (double& x : row) {
        x -= mean;
        if (sd > 1e-12) x /= sd;
      }
  }

  Eigen::MatrixXd m1, m2;  // adaptive-step moments
  if (config.adaptive_optimizer) {
    m1 = Eigen::MatrixXd::Zero(S, A);
    m2 = Eigen::MatrixXd::Zero(S, A);
  }

  Eigen::MatrixXd probs = policy.probs();
  for (int epoch = 1; epoch <= config.ppo_epochs; ++epoch) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(S, A);
    for (size_t j = 0; j < batch.size(); ++j) {
      const Trajectory& traj = batch[j];
      for (int k = 0; k < traj.length(); ++k) {
        int s = traj.states[k], a = traj.actions[k];
        double ratio = probs(s, a) / old_probs(s, a);
        double unclipped = ratio * adv[j][k];
        double clipped =
            std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) *
            adv[j][k];
        if (unclipped <= clipped) {
          // the ratio path is active; push it along the score direction
          double w = adv[j][k] * ratio;
          for (int b = 0; b < A; ++b)
            grad(s, b) += w * ((b == a ? 1.0 : 0.0) - probs(s, b));
        }
        if (config.eta != 0.0) {
          double h = 0.0;
          for (int b = 0; b < A; ++b)
            if (probs(s, b) > 0.0) h -= probs(s, b) * std::log(probs(s, b));
          for (int b = 0; b < A; ++b)
            grad(s, b) += config.eta * probs(s, b) *
                          (-std::log(std::max(probs(s, b), 1e-300)) - h);
        }
      }
    }
    grad /= static_cast<double>(n_pos);
    if (config.adaptive_optimizer) {
      m1 = 0.9 * m1 + 0.1 * grad;
      m2 = 0.999 * m2 + 0.001 * grad.cwiseProduct(grad);
      double c1 = 1.0 - std::pow(0.9, epoch);
      double c2 = 1.0 - std::pow(0.999, epoch);
      Eigen::MatrixXd step =
          (m1 / c1).cwiseQuotient(((m2 / c2).cwiseSqrt().array() + 1e-8).matrix());
      policy.logits += config.lr_policy * step;
    } else {
      policy.logits += config.lr_policy * grad;
    }
    for (int s = 0; s < S; ++s)
      policy.logits.row(s).array() -= policy.logits.row(s).maxCoeff();
    probs = policy.probs();
  }

  PpoReport report;
  double kl = 0.0, ratio_sum = 0.0;
  for (const Trajectory& traj : batch)
    for (int k = 0; k < traj.length(); ++k) {
      int s = traj.states[k];
      for (int b = 0; b < A; ++b)
        kl += old_probs(s, b) * std::log(old_probs(s, b) / probs(s, b));
      ratio_sum += probs(s, traj.actions[k]) / old_probs(s, traj.actions[k]);
    }
  report.kl = kl / static_cast<double>(n_pos);
  report.mean_ratio = ratio_sum / static_cast<double>(n_pos);
  return report;
}

TrainResult train(const DiscountedCmp& env, const TrainerConfig& config) {
  validate(env);
  if (config.gamma <= 0.0 || config.gamma >= 1.0)
    throw std::invalid_argument("training needs a rollout discount in (0, 1)");
  DiscountedCmp world = env;
  world.gamma = config.gamma;

  const int S = world.n_states, A = world.n_actions;
  Rng rng(config.seed);
  TrainResult result;
  result.policy = TabularPolicy::uniform(S, A);
  result.value = TabularValueFn::zeros(S);
  ReplayBuffer buffer(config.buffer_iters);

  for (int iter = 0; iter < config.iterations; ++iter) {
    Batch batch = rollout_geometric(world, result.policy, config.traj_per_iter, rng);
    double mean_len = 0.0;
    for (const Trajectory& traj : batch) mean_len += traj.length();
    mean_len /= std::max<size_t>(1, batch.size());
    buffer.push(std::move(batch));

    CountDensity density =
        fit_density(buffer.newest().batch, S, A, config.kappa);
    buffer.relabel(density, config.alpha, config.reward_cap);
    result.final_counts = density.counts;

    std::vector<int> states;
    std::vector<double> targets;
    for (const ReplayBuffer::Entry& entry : buffer.entries()) {
      BatchRewards t = td_lambda_targets(entry.batch, entry.rewards, result.value,
                                         config.lambda, config.trunc_steps);
      for (size_t j = 0; j < entry.batch.size(); ++j)
        for (int k = 0; k < entry.batch[j].length(); ++k) {
          states.push_back(entry.batch[j].states[k]);
          targets.push_back(t[j][k]);
        }
    }
    double value_loss = fit_value(result.value, states, targets, config.lr_value,
                                  config.ppo_epochs);

    PpoReport ppo = ppo_update(result.policy, buffer.newest().batch, density,
                               result.value, config);

    IterationMetrics metrics;
    metrics.iter = iter;
    Eigen::VectorXd d = occupancy(world, result.policy).w.cwiseMax(0.0);
    d /= d.sum();
    metrics.exact_entropy = renyi_entropy(d, config.alpha);
    metrics.mc_entropy = std::numeric_limits<double>::quiet_NaN();
    if (config.mc_entropy_every > 0 && iter % config.mc_entropy_every == 0) {
      McProtocol protocol;
      protocol.seed = config.seed + 7919UL * (iter + 1);
      metrics.mc_entropy =
          estimate_entropy_mc(world, result.policy, config.alpha, protocol);
    }
    metrics.mean_traj_len = mean_len;
    metrics.policy_kl = ppo.kl;
    metrics.value_loss = value_loss;
    result.metrics.push_back(metrics);
  }
  return result;
}

double estimate_entropy_mc(const DiscountedCmp& env, const TabularPolicy& policy,
                           double alpha, const McProtocol& protocol) {
  Rng rng(protocol.seed);
  const int A = env.n_actions;
  if (alpha == 0.0) {
    double acc = 0.0;
    for (int g = 0; g < protocol.groups; ++g) {
      Batch group = rollout_geometric(env, policy, protocol.group_size, rng);
      std::set<int> seen;
      for (const Trajectory& traj : group)
        for (int k = 0; k < traj.length(); ++k)
          seen.insert(traj.states[k] * A + traj.actions[k]);
      acc += std::log(static_cast<double>(seen.size()));
    }
    return acc / protocol.groups;
  }
  Batch batch = rollout_geometric(env, policy, protocol.n_traj, rng);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(env.n_pairs());
  double total = 0.0;
  for (const Trajectory& traj : batch)
    for (int k = 0; k < traj.length(); ++k) {
      counts[traj.states[k] * A + traj.actions[k]] += 1.0;
      total += 1.0;
    }
  return renyi_entropy(counts / total, alpha);
}

}  // namespace rfx
