#include "rfx/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rfx {

namespace {

int sample_probs_row(Rng& rng, const Eigen::MatrixXd& probs, int s) {
  double u = rng.uniform();
  double acc = 0.0;
  int n = static_cast<int>(probs.cols());
  for (int a = 0; a < n; ++a) {
    acc += probs(s, a);
    if (u < acc) return a;
  }
  return n - 1;
}

void check_record_range(const TransitionRecord& rec, int n_states, int n_actions,
                        int horizon) {
  bool ok = rec.s >= 0 && rec.s < n_states && rec.s2 >= 0 && rec.s2 < n_states &&
            rec.a >= 0 && rec.a < n_actions;
  if (horizon > 0)
    ok = ok && rec.h >= 1 && rec.h <= horizon;
  else
    ok = ok && rec.h == -1;
  if (!ok) throw std::invalid_argument("transition record out of range for its dataset");
}

// Shared slab accessor: episodic models index by step, stationary models
// always use slab 0.
int slab_of(const EmpiricalModel& m, int h) {
  if (m.horizon == 0) return 0;
  if (h < 1 || h > m.horizon) throw std::out_of_range("step index outside the horizon");
  return h - 1;
}

// Backward DP on the empirical model under a fixed policy. Unseen pairs get
// unseen_value(h) instead of a bootstrapped estimate.
template <typename UnseenValue>
double episodic_policy_value(const EmpiricalModel& model, const RewardFn& reward,
                             const std::vector<Eigen::MatrixXd>& probs,
                             const Eigen::VectorXd& init, UnseenValue unseen_value,
                             std::vector<Eigen::MatrixXd>* out_q = nullptr) {
  const int S = model.n_states;
  const int A = model.n_actions;
  const int H = model.horizon;
  Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
  if (out_q) out_q->assign(H, Eigen::MatrixXd::Zero(S, A));
  for (int h = H; h >= 1; --h) {
    const Eigen::MatrixXd& r = reward.at_step(h);
    Eigen::MatrixXd q(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        if (!model.seen(h, s, a)) {
          q(s, a) = unseen_value(h);
          continue;
        }
        double future = 0.0;
        for (int s2 = 0; s2 < S; ++s2) future += model.p_hat(h, s, a, s2) * v_next[s2];
        q(s, a) = r(s, a) + future;
      }
    if (out_q) (*out_q)[h - 1] = q;
    Eigen::VectorXd v(S);
    for (int s = 0; s < S; ++s) v[s] = probs[h - 1].row(s).dot(q.row(s));
    v_next = v;
  }
  return init.dot(v_next);
}

}  // namespace

bool EmpiricalModel::seen(int h, int s, int a) const {
  return pair_counts[slab_of(*this, h)](s, a) > 0.0;
}

double EmpiricalModel::count(int h, int s, int a) const {
  return pair_counts[slab_of(*this, h)](s, a);
}

double EmpiricalModel::p_hat(int h, int s, int a, int s2) const {
  int k = slab_of(*this, h);
  double n = pair_counts[k](s, a);
  if (n <= 0.0) throw std::logic_error("transition estimate requested for an unseen pair");
  return transition_counts[k](s * n_actions + a, s2) / n;
}

double EmpiricalModel::total_count() const {
  double t = 0.0;
  for (const auto& m : pair_counts) t += m.sum();
  return t;
}

RewardFn RewardFn::stationary(Eigen::MatrixXd r) {
  RewardFn f;
  f.table.push_back(std::move(r));
  return f;
}

RewardFn RewardFn::per_step(std::vector<Eigen::MatrixXd> r) {
  if (r.empty()) throw std::invalid_argument("per-step reward needs at least one step");
  RewardFn f;
  f.table = std::move(r);
  return f;
}

RewardFn RewardFn::constant(int n_states, int n_actions, double value) {
  return stationary(Eigen::MatrixXd::Constant(n_states, n_actions, value));
}

RewardFn RewardFn::single_pair(int n_states, int n_actions, int s, int a) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n_states, n_actions);
  r(s, a) = 1.0;
  return stationary(std::move(r));
}

double RewardFn::max_entry() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& t : table) m = std::max(m, t.maxCoeff());
  return m;
}

void RewardFn::check_theory_range() const {
  for (const auto& t : table) {
    if (!t.allFinite()) throw std::invalid_argument("reward table has non-finite entries");
    if (t.minCoeff() < 0.0 || t.maxCoeff() > 1.0)
      throw std::invalid_argument("theory mode needs rewards in [0, 1]");
  }
}

TransitionDataset collect_dataset(const DiscountedCmp& env, const TabularPolicy& policy,
                                  long n_trajectories, Rng& rng, long max_records) {
  validate(env);
  if (env.gamma >= 1.0)
    throw std::invalid_argument("geometric collection needs a discount below one");
  if (n_trajectories <= 0) throw std::invalid_argument("need at least one trajectory");
  if (policy.n_states() != env.n_states || policy.n_actions() != env.n_actions)
    throw std::invalid_argument("policy shape does not match the environment");

  Eigen::MatrixXd probs = policy.probs();
  TransitionDataset ds;
  ds.n_states = env.n_states;
  ds.n_actions = env.n_actions;
  ds.gamma = env.gamma;
  ds.source = "stationary policy, geometric rollouts";
  bool capped = max_records > 0;
  long traj = 0;
  while (traj < n_trajectories && !(capped && ds.size() >= max_records)) {
    ++traj;
    int s = rng.categorical(env.init.data(), env.n_states);
    while (true) {
      int a = sample_probs_row(rng, probs, s);
      int s2 = rng.categorical(env.row(s, a), env.n_states);
      ds.records.push_back({s, a, s2, -1});
      if (capped && ds.size() >= max_records) break;
      if (rng.uniform() < 1.0 - env.gamma) break;
      s = s2;
    }
  }
  ds.n_trajectories = traj;
  return ds;
}

TransitionDataset collect_dataset(const EpisodicMdp& env, const PolicyMixture& mixture,
                                  long n_trajectories, Rng& rng) {
  validate(env);
  if (n_trajectories <= 0) throw std::invalid_argument("need at least one trajectory");
  if (mixture.policies.empty())
    throw std::invalid_argument("mixture must contain at least one policy");
  std::vector<std::vector<Eigen::MatrixXd>> probs(mixture.policies.size());
  for (std::size_t k = 0; k < mixture.policies.size(); ++k) {
    const NonStationaryPolicy& pol = mixture.policies[k];
    if (pol.horizon() != env.horizon || pol.logits[0].rows() != env.n_states ||
        pol.logits[0].cols() != env.n_actions)
      throw std::invalid_argument("mixture policy shape does not match the environment");
    for (int h = 0; h < env.horizon; ++h) probs[k].push_back(pol.probs(h));
  }

  TransitionDataset ds;
  ds.n_states = env.n_states;
  ds.n_actions = env.n_actions;
  ds.horizon = env.horizon;
  ds.source = "uniform policy mixture, episodic rollouts";
  ds.selection_counts.assign(mixture.policies.size(), 0);
  ds.records.reserve(static_cast<std::size_t>(n_trajectories) * env.horizon);
  for (long j = 0; j < n_trajectories; ++j) {
    int k = rng.uniform_int(static_cast<int>(mixture.policies.size()));
    ++ds.selection_counts[k];
    int s = rng.categorical(env.init.data(), env.n_states);
    for (int h = 1; h <= env.horizon; ++h) {
      int a = sample_probs_row(rng, probs[k][h - 1], s);
      int s2 = rng.categorical(env.row(h - 1, s, a), env.n_states);
      ds.records.push_back({s, a, s2, h});
      s = s2;
    }
  }
  ds.n_trajectories = n_trajectories;
  return ds;
}

EmpiricalModel estimate_model(const TransitionDataset& dataset) {
  if (dataset.n_states <= 0 || dataset.n_actions <= 0)
    throw std::invalid_argument("dataset carries no model dimensions");
  EmpiricalModel m;
  m.n_states = dataset.n_states;
  m.n_actions = dataset.n_actions;
  m.horizon = dataset.horizon;
  m.gamma = dataset.gamma;
  int slabs = dataset.horizon > 0 ? dataset.horizon : 1;
  m.transition_counts.assign(
      slabs, Eigen::MatrixXd::Zero(m.n_states * m.n_actions, m.n_states));
  m.pair_counts.assign(slabs, Eigen::MatrixXd::Zero(m.n_states, m.n_actions));
  for (const TransitionRecord& rec : dataset.records) {
    check_record_range(rec, m.n_states, m.n_actions, m.horizon);
    int k = dataset.horizon > 0 ? rec.h - 1 : 0;
    m.transition_counts[k](rec.s * m.n_actions + rec.a, rec.s2) += 1.0;
    m.pair_counts[k](rec.s, rec.a) += 1.0;
  }
  return m;
}

EmpiricalModel exact_model(const DiscountedCmp& env) {
  validate(env);
  EmpiricalModel m;
  m.n_states = env.n_states;
  m.n_actions = env.n_actions;
  m.horizon = 0;
  m.gamma = env.gamma;
  Eigen::MatrixXd t(env.n_pairs(), env.n_states);
  for (int s = 0; s < env.n_states; ++s)
    for (int a = 0; a < env.n_actions; ++a)
      for (int s2 = 0; s2 < env.n_states; ++s2)
        t(s * env.n_actions + a, s2) = env.p(s, a, s2);
  m.transition_counts.push_back(std::move(t));
  m.pair_counts.push_back(Eigen::MatrixXd::Ones(env.n_states, env.n_actions));
  return m;
}

EmpiricalModel exact_model(const EpisodicMdp& env) {
  validate(env);
  EmpiricalModel m;
  m.n_states = env.n_states;
  m.n_actions = env.n_actions;
  m.horizon = env.horizon;
  for (int h = 1; h <= env.horizon; ++h) {
    Eigen::MatrixXd t(env.n_pairs(), env.n_states);
    for (int s = 0; s < env.n_states; ++s)
      for (int a = 0; a < env.n_actions; ++a)
        for (int s2 = 0; s2 < env.n_states; ++s2)
          t(s * env.n_actions + a, s2) = env.p(h - 1, s, a, s2);
    m.transition_counts.push_back(std::move(t));
    m.pair_counts.push_back(Eigen::MatrixXd::Ones(env.n_states, env.n_actions));
  }
  return m;
}

namespace {

void check_plan_inputs(const EmpiricalModel& model, const RewardFn& reward) {
  if (model.n_states <= 0 || model.n_actions <= 0 || model.pair_counts.empty())
    throw std::invalid_argument("cannot plan on an empty model");
  if (model.total_count() <= 0.0)
    throw std::invalid_argument("cannot plan on an empty model");
  for (const auto& t : reward.table)
    if (t.rows() != model.n_states || t.cols() != model.n_actions)
      throw std::invalid_argument("reward shape does not match the model");
  if (model.horizon > 0) {
    if (!reward.is_stationary() && reward.steps() != model.horizon)
      throw std::invalid_argument("per-step reward horizon does not match the model");
  } else {
    if (!reward.is_stationary())
      throw std::invalid_argument("stationary models need a stationary reward");
  }
}

PlanResult plan_episodic_vi(const EmpiricalModel& model, const RewardFn& reward,
                            const PlanOptions& opts, bool batch_constrained) {
  const int S = model.n_states;
  const int A = model.n_actions;
  const int H = model.horizon;
  double top = std::max(reward.max_entry(), 0.0);
  Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
  std::vector<Eigen::MatrixXd> rows(H);
  for (int h = H; h >= 1; --h) {
    const Eigen::MatrixXd& r = reward.at_step(h);
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(S, A);
    Eigen::VectorXd v(S);
    for (int s = 0; s < S; ++s) {
      int best = -1;
      double best_q = 0.0;
      for (int a = 0; a < A; ++a) {
        bool usable = batch_constrained ? model.count(h, s, a) >= opts.n_min
                                        : model.seen(h, s, a);
        double q;
        if (usable) {
          q = r(s, a);
          for (int s2 = 0; s2 < S; ++s2) q += model.p_hat(h, s, a, s2) * v_next[s2];
        } else if (batch_constrained) {
          continue;
        } else {
          q = opts.optimistic_unseen ? top * (H - h + 1) : 0.0;
        }
        if (best < 0 || q > best_q) {
          best = a;
          best_q = q;
        }
      }
      if (best < 0) {
        // No action clears the visit threshold; fall back to uniform and
        // score the state pessimistically.
        probs.row(s).setConstant(1.0 / A);
        v[s] = 0.0;
      } else {
        probs(s, best) = 1.0;
        v[s] = best_q;
      }
    }
    rows[h - 1] = probs;
    v_next = v;
  }
  PlanResult res;
  res.episodic = true;
  res.per_step.logits.resize(H);
  for (int h = 0; h < H; ++h)
    res.per_step.logits[h] = TabularPolicy::from_probs(rows[h]).logits;
  res.method = batch_constrained ? "batch-constrained" : "value-iteration";
  res.iterations = H;
  return res;
}

PlanResult plan_discounted_vi(const EmpiricalModel& model, const RewardFn& reward,
                              const PlanOptions& opts, bool batch_constrained) {
  const int S = model.n_states;
  const int A = model.n_actions;
  double gamma = opts.gamma >= 0.0 ? opts.gamma : model.gamma;
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("discounted planning needs a discount in (0, 1)");
  const Eigen::MatrixXd& r = reward.table[0];
  double top = std::max(reward.max_entry(), 0.0);
  double unseen_v = opts.optimistic_unseen ? top / (1.0 - gamma) : 0.0;

  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  long sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    Eigen::VectorXd v_new(S);
    for (int s = 0; s < S; ++s) {
      double best_q = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (int a = 0; a < A; ++a) {
        bool usable = batch_constrained ? model.count(1, s, a) >= opts.n_min
                                        : model.seen(1, s, a);
        double q;
        if (usable) {
          q = r(s, a);
          for (int s2 = 0; s2 < S; ++s2)
            q += gamma * model.p_hat(1, s, a, s2) * v[s2];
        } else if (batch_constrained) {
          continue;
        } else {
          q = opts.optimistic_unseen ? r(s, a) + gamma * unseen_v : 0.0;
        }
        any = true;
        best_q = std::max(best_q, q);
      }
      v_new[s] = any ? best_q : 0.0;
    }
    Eigen::VectorXd diff = v_new - v;
    double span = diff.maxCoeff() - diff.minCoeff();
    double sup = diff.cwiseAbs().maxCoeff();
    v = v_new;
    if (std::min(span, sup) <= opts.span_tol) break;
  }

  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    int best = -1;
    double best_q = 0.0;
    for (int a = 0; a < A; ++a) {
      bool usable = batch_constrained ? model.count(1, s, a) >= opts.n_min
                                      : model.seen(1, s, a);
      double q;
      if (usable) {
        q = r(s, a);
        for (int s2 = 0; s2 < S; ++s2) q += gamma * model.p_hat(1, s, a, s2) * v[s2];
      } else if (batch_constrained) {
        continue;
      } else {
        q = opts.optimistic_unseen ? r(s, a) + gamma * unseen_v : 0.0;
      }
      if (best < 0 || q > best_q) {
        best = a;
        best_q = q;
      }
    }
    if (best < 0)
      probs.row(s).setConstant(1.0 / A);
    else
      probs(s, best) = 1.0;
  }

  PlanResult res;
  res.episodic = false;
  res.policy = TabularPolicy::from_probs(probs);
  res.method = batch_constrained ? "batch-constrained" : "value-iteration";
  res.iterations = sweeps;
  res.j_hat = 0.0;
  return res;
}

PlanResult plan_episodic_npg(const EmpiricalModel& model, const RewardFn& reward,
                             const PlanOptions& opts) {
  const int S = model.n_states;
  const int A = model.n_actions;
  const int H = model.horizon;
  double log_a = std::log(static_cast<double>(A));
  long T = opts.iters > 0
               ? opts.iters
               : static_cast<long>(std::ceil(4.0 * H * H * H * log_a /
                                             (opts.epsilon * opts.epsilon)));
  T = std::max<long>(T, 1);
  double eta = opts.eta > 0.0 ? opts.eta : std::sqrt(log_a / (static_cast<double>(H) * T));
  double unseen_v = 0.0;  // pessimistic default; the convergence schedule assumes it
  if (opts.optimistic_unseen) unseen_v = std::max(reward.max_entry(), 0.0) * H;

  std::vector<Eigen::MatrixXd> logits(H, Eigen::MatrixXd::Zero(S, A));
  std::vector<Eigen::MatrixXd> probs(H, Eigen::MatrixXd::Constant(S, A, 1.0 / A));
  for (long t = 0; t < T; ++t) {
    // Q of the current policy on the empirical model, backward in h.
    Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
    std::vector<Eigen::MatrixXd> q_all(H);
    for (int h = H; h >= 1; --h) {
      const Eigen::MatrixXd& r = reward.at_step(h);
      Eigen::MatrixXd q(S, A);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          if (!model.seen(h, s, a)) {
            q(s, a) = unseen_v;
            continue;
          }
          double future = 0.0;
          for (int s2 = 0; s2 < S; ++s2)
            future += model.p_hat(h, s, a, s2) * v_next[s2];
          q(s, a) = r(s, a) + future;
        }
      q_all[h - 1] = q;
      Eigen::VectorXd v(S);
      for (int s = 0; s < S; ++s) v[s] = probs[h - 1].row(s).dot(q.row(s));
      v_next = v;
    }
    for (int h = 0; h < H; ++h) {
      logits[h] += eta * q_all[h];
      for (int s = 0; s < S; ++s) {
        double m = logits[h].row(s).maxCoeff();
        logits[h].row(s).array() -= m;
        Eigen::ArrayXd e = logits[h].row(s).array().exp();
        probs[h].row(s) = (e / e.sum()).matrix().transpose();
      }
    }
  }

  PlanResult res;
  res.episodic = true;
  res.per_step.logits = logits;
  res.method = "npg";
  res.iterations = T;
  return res;
}

}  // namespace

PlanResult plan(const EmpiricalModel& model, const RewardFn& reward,
                PlanMethod method, const PlanOptions& opts) {
  check_plan_inputs(model, reward);
  PlanResult res;
  if (model.horizon > 0) {
    switch (method) {
      case PlanMethod::value_iteration:
        res = plan_episodic_vi(model, reward, opts, false);
        break;
      case PlanMethod::batch_constrained:
        res = plan_episodic_vi(model, reward, opts, true);
        break;
      case PlanMethod::npg:
        res = plan_episodic_npg(model, reward, opts);
        break;
    }
    // Value of the planned policy on the empirical model, with the same
    // pessimistic (or optimistic) unseen handling the planner used.
    double top = std::max(reward.max_entry(), 0.0);
    std::vector<Eigen::MatrixXd> probs(model.horizon);
    for (int h = 0; h < model.horizon; ++h) probs[h] = res.per_step.probs(h);
    auto unseen = [&](int h) {
      return opts.optimistic_unseen ? top * (model.horizon - h + 1) : 0.0;
    };
    // Counts carry no initial distribution, so j_hat reports the value from
    // a uniform start.
    Eigen::VectorXd uniform_init =
        Eigen::VectorXd::Constant(model.n_states, 1.0 / model.n_states);
    res.j_hat = episodic_policy_value(model, reward, probs, uniform_init, unseen);
  } else {
    if (method == PlanMethod::npg)
      throw std::invalid_argument("npg planning is defined for episodic models only");
    res = plan_discounted_vi(model, reward, opts,
                             method == PlanMethod::batch_constrained);
  }
  return res;
}

double evaluate_policy(const DiscountedCmp& env, const TabularPolicy& policy,
                       const RewardFn& reward) {
  validate(env);
  if (!reward.is_stationary())
    throw std::invalid_argument("discounted evaluation needs a stationary reward");
  if (env.gamma >= 1.0)
    throw std::invalid_argument("discounted evaluation needs a discount below one");
  const Eigen::MatrixXd& r = reward.table[0];
  if (r.rows() != env.n_states || r.cols() != env.n_actions)
    throw std::invalid_argument("reward shape does not match the environment");
  Eigen::MatrixXd probs = policy.probs();
  const int S = env.n_states;
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(S, S);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < env.n_actions; ++a) {
      r_pi[s] += probs(s, a) * r(s, a);
      for (int s2 = 0; s2 < S; ++s2) p_pi(s, s2) += probs(s, a) * env.p(s, a, s2);
    }
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(S, S) - env.gamma * p_pi;
  Eigen::VectorXd v = sys.partialPivLu().solve(r_pi);
  Eigen::Map<const Eigen::VectorXd> mu(env.init.data(), S);
  return mu.dot(v);
}

double evaluate_policy(const EpisodicMdp& env, const NonStationaryPolicy& policy,
                       const RewardFn& reward) {
  validate(env);
  if (policy.horizon() != env.horizon)
    throw std::invalid_argument("policy horizon does not match the environment");
  if (!reward.is_stationary() && reward.steps() != env.horizon)
    throw std::invalid_argument("per-step reward horizon does not match the environment");
  for (const auto& t : reward.table)
    if (t.rows() != env.n_states || t.cols() != env.n_actions)
      throw std::invalid_argument("reward shape does not match the environment");
  const int S = env.n_states;
  const int A = env.n_actions;
  Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
  for (int h = env.horizon; h >= 1; --h) {
    const Eigen::MatrixXd& r = reward.at_step(h);
    Eigen::MatrixXd probs = policy.probs(h - 1);
    Eigen::VectorXd v(S);
    for (int s = 0; s < S; ++s) {
      double acc = 0.0;
      for (int a = 0; a < A; ++a) {
        double future = 0.0;
        for (int s2 = 0; s2 < S; ++s2) future += env.p(h - 1, s, a, s2) * v_next[s2];
        acc += probs(s, a) * (r(s, a) + future);
      }
      v[s] = acc;
    }
    v_next = v;
  }
  Eigen::Map<const Eigen::VectorXd> mu(env.init.data(), S);
  return mu.dot(v_next);
}

double theoretical_sample_bound(int n_states, int n_actions, int horizon,
                                double epsilon, double p, double alpha, double c) {
  if (n_states < 1 || n_actions < 1 || horizon < 1)
    throw std::invalid_argument("sample bound needs positive model dimensions");
  if (epsilon <= 0.0 || epsilon >= 1.0 || p <= 0.0 || p >= 1.0)
    throw std::invalid_argument("epsilon and p must lie in (0, 1)");
  if (c <= 0.0) throw std::invalid_argument("the constant c must be positive");
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("the entropy order must lie in [0, 1]");
  if (alpha == 1.0)
    throw AlphaOneDivergence("the sample bound diverges as the order reaches one");
  double beta = alpha / (2.0 * (1.0 - alpha));
  double s = n_states, a = n_actions, h = horizon;
  double base = h * h * s * a / epsilon;
  return c * std::pow(base, 2.0 * (beta + 1.0)) * (h / a) *
         std::log(s * a * h / (p * epsilon));
}

PolicyMixture exploratory_mixture(const EpisodicMdp& m, double alpha,
                                  const SolveOptions& opts) {
  validate(m);
  PolicyMixture mix;
  for (int h = 1; h <= m.horizon; ++h) {
    OptimizerReport rep = maximize_entropy_step(m, h, alpha, SolveMethod::frank_wolfe, opts);
    mix.policies.push_back(rep.step_policy);
    std::ostringstream label;
    label << rep.method << " maximizer of step " << h << " (order " << rep.used_alpha
          << ")";
    mix.labels.push_back(label.str());
  }
  return mix;
}

SignificanceReport significance_diagnostic(const EpisodicMdp& m,
                                           const PolicyMixture& mixture,
                                           double delta, double alpha) {
  validate(m);
  if (mixture.policies.empty())
    throw std::invalid_argument("mixture must contain at least one policy");
  if (delta <= 0.0 || delta > 1.0)
    throw std::invalid_argument("delta must lie in (0, 1]");
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("the diagnostic needs an order in [0, 1)");

  SignificanceReport rep;
  rep.delta = delta;
  rep.alpha = alpha;
  double exponent = alpha / (1.0 - alpha);
  rep.bound = m.n_states * m.n_actions * m.horizon / std::pow(delta, exponent);

  const int K = mixture.size();
  for (int h = 1; h <= m.horizon; ++h) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m.n_pairs());
    for (int k = 0; k < K; ++k)
      mu += episodic_step_distribution(m, mixture.policies[k], h).w;
    mu /= static_cast<double>(K);
    for (int s = 0; s < m.n_states; ++s)
      for (int a = 0; a < m.n_actions; ++a) {
        double reach = max_reach(m, s, a, h);
        if (reach < delta) continue;
        ++rep.n_significant;
        double mass = mu[s * m.n_actions + a];
        double ratio = mass > 0.0 ? reach / mass
                                  : std::numeric_limits<double>::infinity();
        if (ratio > rep.worst_ratio) {
          rep.worst_ratio = ratio;
          rep.worst_s = s;
          rep.worst_a = a;
          rep.worst_h = h;
        }
      }
  }
  rep.satisfied = rep.worst_ratio <= rep.bound;
  return rep;
}

}  // namespace rfx
