#include "rfx/solvers.hpp"

#include "rfx/entropy.hpp"
#include "rfx/gradients.hpp"
#include "rfx/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace rfx {

namespace {

constexpr double kTiny = 1e-300;

// Entropy of a possibly slightly-off-simplex vector (solver internals see
// 1e-16 noise; the public renyi_entropy validates strictly).
double entropy_of(Eigen::VectorXd d, double alpha) {
  d = d.cwiseMax(0.0);
  d /= d.sum();
  if (alpha == 1.0) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (d[i] > 0.0) h -= d[i] * std::log(d[i]);
    return h;
  }
  double z = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) z += std::pow(d[i], alpha);
  return std::log(z) / (1.0 - alpha);
}

Eigen::VectorXd entropy_grad_in_density(const Eigen::VectorXd& d, double alpha) {
  Eigen::VectorXd c(d.size());
  if (alpha == 1.0) {
    for (Eigen::Index i = 0; i < d.size(); ++i)
      c[i] = -std::log(std::max(d[i], kTiny)) - 1.0;
    return c;
  }
  double z = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) z += std::pow(std::max(d[i], 0.0), alpha);
  double pref = alpha / ((1.0 - alpha) * z);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    c[i] = pref * std::pow(std::max(d[i], kTiny), alpha - 1.0);
  return c;
}

double effective_alpha(double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("order outside [0,1]");
  return std::max(alpha, 0.01);
}

void recenter_rows(Eigen::MatrixXd& logits) {
  for (Eigen::Index s = 0; s < logits.rows(); ++s)
    logits.row(s).array() -= logits.row(s).maxCoeff();
}

// Golden-section maximization of f on [0,1].
template <typename F>
double golden_max(const F& f, int iters = 70) {
  const double inv_phi = 0.6180339887498949;
  double a = 0.0, b = 1.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// ---- gradient ascent, stationary policies ------------------------------

struct AscentOutcome {
  TabularPolicy policy;
  double value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> trace;
  bool converged = false;
};

AscentOutcome ascend_discounted(const DiscountedCmp& m, double alpha,
                                const SolveOptions& opts) {
  const int S = m.n_states, A = m.n_actions;
  Rng rng(opts.seed);
  AscentOutcome best;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    TabularPolicy pol = TabularPolicy::uniform(S, A);
    if (r > 0)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) pol.logits(s, a) = 0.5 * rng.normal();

    AscentOutcome cur;
    double h = entropy_of(occupancy(m, pol).w, alpha);
    cur.trace.push_back(h);
    double step = 1.0;
    for (int it = 0; it < opts.max_iters; ++it) {
      PolicyGradient g = entropy_gradient_exact(m, pol, alpha);
      double gnorm = g.g.cwiseAbs().maxCoeff();
      cur.iterations = it + 1;
      if (gnorm < opts.tol) {
        cur.converged = true;
        break;
      }
      double g2 = g.g.squaredNorm();
      bool accepted = false;
      while (step > 1e-18) {
        TabularPolicy cand = pol;
        cand.logits += step * g.g;
        recenter_rows(cand.logits);
        double hc = entropy_of(occupancy(m, cand).w, alpha);
        if (hc >= h + 1e-4 * step * g2) {
          pol = cand;
          h = hc;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // search direction exhausted at float precision
      step = std::min(step * 2.0, 64.0);
      cur.trace.push_back(h);
    }
    cur.policy = pol;
    cur.value = h;
    if (cur.value > best.value) best = std::move(cur);
  }
  return best;
}

// ---- Frank-Wolfe, stationary policies ----------------------------------

// Best-response deterministic policy for pair reward c via value iteration.
Eigen::MatrixXd best_response_probs(const DiscountedCmp& m, const Eigen::VectorXd& c) {
  const int S = m.n_states, A = m.n_actions;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd nv(S);
    for (int s = 0; s < S; ++s) {
      double bestq = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = c[s * A + a];
        const double* row = m.row(s, a);
        for (int s2 = 0; s2 < S; ++s2) q += m.gamma * row[s2] * v[s2];
        bestq = std::max(bestq, q);
      }
      nv[s] = bestq;
    }
    double diff = (nv - v).cwiseAbs().maxCoeff();
    v = nv;
    if (diff < 1e-13 * std::max(1.0, v.cwiseAbs().maxCoeff())) break;
  }
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    int best_a = 0;
    double bestq = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      double q = c[s * A + a];
      const double* row = m.row(s, a);
      for (int s2 = 0; s2 < S; ++s2) q += m.gamma * row[s2] * v[s2];
      if (q > bestq) {
        bestq = q;
        best_a = a;
      }
    }
    probs(s, best_a) = 1.0;
  }
  return probs;
}

AscentOutcome frank_wolfe_discounted(const DiscountedCmp& m, double alpha,
                                     const SolveOptions& opts) {
  AscentOutcome out;
  Eigen::VectorXd d = occupancy(m, TabularPolicy::uniform(m.n_states, m.n_actions)).w;
  out.trace.push_back(entropy_of(d, alpha));
  for (int it = 0; it < opts.max_iters; ++it) {
    out.iterations = it + 1;
    Eigen::VectorXd c = entropy_grad_in_density(d, alpha);
    Eigen::VectorXd d_br = occupancy(m, best_response_probs(m, c)).w;
    double gap = c.dot(d_br - d);
    if (gap < opts.tol) {
      out.converged = true;
      break;
    }
    double t = golden_max(
        [&](double u) { return entropy_of((1.0 - u) * d + u * d_br, alpha); });
    d = (1.0 - t) * d + t * d_br;
    out.trace.push_back(entropy_of(d, alpha));
  }
  OccupancyMeasure dm;
  dm.n_states = m.n_states;
  dm.n_actions = m.n_actions;
  dm.w = d;
  out.policy = policy_from_occupancy(dm);
  out.value = entropy_of(occupancy(m, out.policy).w, alpha);
  return out;
}

}  // namespace

OptimizerReport maximize_entropy(const DiscountedCmp& m, double alpha,
                                 SolveMethod method, const SolveOptions& opts) {
  validate(m);
  double a = effective_alpha(alpha);
  OptimizerReport rep;
  rep.used_alpha = a;
  if (method == SolveMethod::frank_wolfe) {
    if (m.gamma >= 1.0)
      throw std::invalid_argument(
          "frank-wolfe iterates on discounted occupancies; use gradient "
          "ascent at gamma = 1");
    auto out = frank_wolfe_discounted(m, a, opts);
    rep.policy = out.policy;
    rep.objective = out.value;
    rep.iterations = out.iterations;
    rep.trace = std::move(out.trace);
    rep.method = "frank-wolfe";
    rep.converged = out.converged;
    return rep;
  }
  auto out = ascend_discounted(m, a, opts);
  rep.policy = out.policy;
  rep.objective = out.value;
  rep.iterations = out.iterations;
  rep.trace = std::move(out.trace);
  rep.method = "gradient-ascent";
  rep.converged = out.converged;
  return rep;
}

namespace {

// ---- episodic machinery -------------------------------------------------

struct EpisodicEval {
  std::vector<Eigen::VectorXd> state_dist;  // x_1..x_h
  Eigen::VectorXd d_h;                      // step-h pair distribution
};

EpisodicEval forward_pass(const EpisodicMdp& m,
                          const std::vector<Eigen::MatrixXd>& probs, int h) {
  const int S = m.n_states, A = m.n_actions;
  EpisodicEval ev;
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(m.init.data(), S);
  ev.state_dist.push_back(x);
  for (int t = 0; t < h - 1; ++t) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
      if (x[s] == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        double w = x[s] * probs[t](s, a);
        if (w == 0.0) continue;
        const double* row = m.row(t, s, a);
        for (int s2 = 0; s2 < S; ++s2) next[s2] += w * row[s2];
      }
    }
    x = next;
    ev.state_dist.push_back(x);
  }
  ev.d_h.resize(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) ev.d_h[s * A + a] = x[s] * probs[h - 1](s, a);
  return ev;
}

// Reverse-mode pass for dH(d_h)/dlogits; returns per-step gradients.
std::vector<Eigen::MatrixXd> backward_pass(const EpisodicMdp& m,
                                           const std::vector<Eigen::MatrixXd>& probs,
                                           int h, const EpisodicEval& ev,
                                           const Eigen::VectorXd& c) {
  const int S = m.n_states, A = m.n_actions;
  std::vector<Eigen::MatrixXd> grads(h, Eigen::MatrixXd::Zero(S, A));

  // Step h: d_h(s,a) = x_h(s) pi_h(a|s).
  Eigen::VectorXd v(S);  // dH/dx_t, seeded at t = h
  for (int s = 0; s < S; ++s) {
    double mixed = 0.0;
    for (int a = 0; a < A; ++a) mixed += probs[h - 1](s, a) * c[s * A + a];
    for (int b = 0; b < A; ++b)
      grads[h - 1](s, b) =
          ev.state_dist[h - 1][s] * probs[h - 1](s, b) * (c[s * A + b] - mixed);
    v[s] = mixed;
  }
  for (int t = h - 2; t >= 0; --t) {
    Eigen::MatrixXd q(S, A);  // response of H to pushing mass through (s,a)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const double* row = m.row(t, s, a);
        double acc = 0.0;
        for (int s2 = 0; s2 < S; ++s2) acc += row[s2] * v[s2];
        q(s, a) = acc;
      }
    Eigen::VectorXd nv(S);
    for (int s = 0; s < S; ++s) {
      double mixed = 0.0;
      for (int a = 0; a < A; ++a) mixed += probs[t](s, a) * q(s, a);
      for (int b = 0; b < A; ++b)
        grads[t](s, b) = ev.state_dist[t][s] * probs[t](s, b) * (q(s, b) - mixed);
      nv[s] = mixed;
    }
    v = nv;
  }
  return grads;
}

AscentOutcome ascend_episodic(const EpisodicMdp& m, int h, double alpha,
                              const SolveOptions& opts, NonStationaryPolicy& out_pol) {
  const int S = m.n_states, A = m.n_actions;
  Rng rng(opts.seed);
  AscentOutcome best;
  std::vector<Eigen::MatrixXd> best_logits;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    std::vector<Eigen::MatrixXd> logits(h, Eigen::MatrixXd::Zero(S, A));
    if (r > 0)
      for (auto& l : logits)
        for (int s = 0; s < S; ++s)
          for (int a = 0; a < A; ++a) l(s, a) = 0.5 * rng.normal();

    auto softmax_all = [&](const std::vector<Eigen::MatrixXd>& ls) {
      std::vector<Eigen::MatrixXd> ps;
      ps.reserve(ls.size());
      for (const auto& l : ls) {
        TabularPolicy tmp;
        tmp.logits = l;
        ps.push_back(tmp.probs());
      }
      return ps;
    };

    AscentOutcome cur;
    auto probs = softmax_all(logits);
    double hv = entropy_of(forward_pass(m, probs, h).d_h, alpha);
    cur.trace.push_back(hv);
    double step = 1.0;
    for (int it = 0; it < opts.max_iters; ++it) {
      auto ev = forward_pass(m, probs, h);
      Eigen::VectorXd c = entropy_grad_in_density(ev.d_h, alpha);
      auto grads = backward_pass(m, probs, h, ev, c);
      double gnorm = 0.0, g2 = 0.0;
      for (const auto& g : grads) {
        gnorm = std::max(gnorm, g.cwiseAbs().maxCoeff());
        g2 += g.squaredNorm();
      }
      cur.iterations = it + 1;
      if (gnorm < opts.tol) {
        cur.converged = true;
        break;
      }
      bool accepted = false;
      while (step > 1e-18) {
        auto cand = logits;
        for (int t = 0; t < h; ++t) {
          cand[t] += step * grads[t];
          recenter_rows(cand[t]);
        }
        auto cand_probs = softmax_all(cand);
        double hc = entropy_of(forward_pass(m, cand_probs, h).d_h, alpha);
        if (hc >= hv + 1e-4 * step * g2) {
          logits = std::move(cand);
          probs = std::move(cand_probs);
          hv = hc;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      step = std::min(step * 2.0, 64.0);
      cur.trace.push_back(hv);
    }
    cur.value = hv;
    if (cur.value > best.value) {
      best = std::move(cur);
      best_logits = logits;
    }
  }
  out_pol.logits.assign(m.horizon, Eigen::MatrixXd::Zero(S, A));
  for (int t = 0; t < h; ++t) out_pol.logits[t] = best_logits[t];
  return best;
}

// Flows F_t(s,a) of a deterministic best-response policy for pair reward c
// at step h, plus the backward DP that finds it.
std::vector<Eigen::MatrixXd> best_response_flows(const EpisodicMdp& m, int h,
                                                 const Eigen::VectorXd& c) {
  const int S = m.n_states, A = m.n_actions;
  std::vector<Eigen::VectorXi> choice(h, Eigen::VectorXi::Zero(S));
  Eigen::VectorXd v(S);
  for (int s = 0; s < S; ++s) {
    int arg = 0;
    for (int a = 1; a < A; ++a)
      if (c[s * A + a] > c[s * A + arg]) arg = a;
    choice[h - 1][s] = arg;
    v[s] = c[s * A + arg];
  }
  for (int t = h - 2; t >= 0; --t) {
    Eigen::VectorXd nv(S);
    for (int s = 0; s < S; ++s) {
      double bestq = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int a = 0; a < A; ++a) {
        const double* row = m.row(t, s, a);
        double q = 0.0;
        for (int s2 = 0; s2 < S; ++s2) q += row[s2] * v[s2];
        if (q > bestq) {
          bestq = q;
          arg = a;
        }
      }
      choice[t][s] = arg;
      nv[s] = bestq;
    }
    v = nv;
  }
  std::vector<Eigen::MatrixXd> flows(h, Eigen::MatrixXd::Zero(S, A));
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(m.init.data(), S);
  for (int t = 0; t < h; ++t) {
    for (int s = 0; s < S; ++s) flows[t](s, choice[t][s]) = x[s];
    if (t + 1 < h) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
      for (int s = 0; s < S; ++s) {
        if (x[s] == 0.0) continue;
        const double* row = m.row(t, s, choice[t][s]);
        for (int s2 = 0; s2 < S; ++s2) next[s2] += x[s] * row[s2];
      }
      x = next;
    }
  }
  return flows;
}

AscentOutcome frank_wolfe_episodic(const EpisodicMdp& m, int h, double alpha,
                                   const SolveOptions& opts,
                                   NonStationaryPolicy& out_pol) {
  const int S = m.n_states, A = m.n_actions;
  // Start from the uniform policy's flows.
  std::vector<Eigen::MatrixXd> uniform_probs(
      h, Eigen::MatrixXd::Constant(S, A, 1.0 / A));
  std::vector<Eigen::MatrixXd> flows(h);
  {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(m.init.data(), S);
    for (int t = 0; t < h; ++t) {
      flows[t] = x.replicate(1, A).array() / A;
      if (t + 1 < h) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
        for (int s = 0; s < S; ++s)
          for (int a = 0; a < A; ++a) {
            const double* row = m.row(t, s, a);
            for (int s2 = 0; s2 < S; ++s2) next[s2] += flows[t](s, a) * row[s2];
          }
        x = next;
      }
    }
  }
  auto flatten = [&](const Eigen::MatrixXd& f) {
    Eigen::VectorXd d(S * A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) d[s * A + a] = f(s, a);
    return d;
  };

  AscentOutcome out;
  Eigen::VectorXd d = flatten(flows[h - 1]);
  out.trace.push_back(entropy_of(d, alpha));
  for (int it = 0; it < opts.max_iters; ++it) {
    out.iterations = it + 1;
    Eigen::VectorXd c = entropy_grad_in_density(d, alpha);
    auto br = best_response_flows(m, h, c);
    Eigen::VectorXd d_br = flatten(br[h - 1]);
    double gap = c.dot(d_br - d);
    if (gap < opts.tol) {
      out.converged = true;
      break;
    }
    double t = golden_max(
        [&](double u) { return entropy_of((1.0 - u) * d + u * d_br, alpha); });
    for (int k = 0; k < h; ++k) flows[k] = (1.0 - t) * flows[k] + t * br[k];
    d = flatten(flows[h - 1]);
    out.trace.push_back(entropy_of(d, alpha));
  }

  // Conditional policy of the mixed flows; uniform on never-visited rows.
  out_pol.logits.assign(m.horizon, Eigen::MatrixXd::Zero(S, A));
  for (int t = 0; t < h; ++t) {
    Eigen::MatrixXd probs(S, A);
    for (int s = 0; s < S; ++s) {
      double rowsum = flows[t].row(s).sum();
      if (rowsum <= 0.0)
        probs.row(s).setConstant(1.0 / A);
      else
        probs.row(s) = flows[t].row(s) / rowsum;
    }
    TabularPolicy tmp = TabularPolicy::from_probs(probs);
    out_pol.logits[t] = tmp.logits;
  }
  out.value = entropy_of(d, alpha);
  return out;
}

}  // namespace

OptimizerReport maximize_entropy_step(const EpisodicMdp& m, int h, double alpha,
                                      SolveMethod method, const SolveOptions& opts) {
  validate(m);
  if (h < 1 || h > m.horizon) throw std::out_of_range("step outside horizon");
  double a = effective_alpha(alpha);
  OptimizerReport rep;
  rep.episodic = true;
  rep.used_alpha = a;
  AscentOutcome out;
  if (method == SolveMethod::frank_wolfe) {
    out = frank_wolfe_episodic(m, h, a, opts, rep.step_policy);
    rep.method = "frank-wolfe";
  } else {
    out = ascend_episodic(m, h, a, opts, rep.step_policy);
    rep.method = "gradient-ascent";
  }
  rep.objective = out.value;
  rep.iterations = out.iterations;
  rep.trace = std::move(out.trace);
  rep.converged = out.converged;
  return rep;
}

namespace {

// Simplex lattice with k steps over `arity` coordinates, emitted as full
// probability rows.
void lattice_rows(int k, int arity, std::vector<std::vector<double>>& out) {
  std::vector<int> cur(arity, 0);
  std::vector<double> row(arity);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == arity - 1) {
      cur[pos] = left;
      for (int i = 0; i < arity; ++i) row[i] = static_cast<double>(cur[i]) / k;
      out.push_back(row);
      return;
    }
    for (int i = 0; i <= left; ++i) {
      cur[pos] = i;
      rec(pos + 1, left - i);
    }
  };
  rec(0, k);
}

double g_of_probs(const DiscountedCmp& m, const Eigen::MatrixXd& probs) {
  OccupancyMeasure d;
  try {
    d = occupancy(m, probs);
  } catch (const SingularSystemError&) {
    return std::numeric_limits<double>::infinity();
  }
  if (d.w.minCoeff() < 1e-12) return std::numeric_limits<double>::infinity();
  Eigen::VectorXd w = d.w.cwiseMax(0.0);
  w /= w.sum();
  if (w.size() <= 20)
    return coupon_collector(w, CouponMethod::inclusion_exclusion).value;
  return coupon_collector(w, CouponMethod::quadrature).value;
}

}  // namespace

OptimizerReport minimize_G(const DiscountedCmp& m, const MinimizeGOptions& opts) {
  validate(m);
  const int S = m.n_states, A = m.n_actions;
  if (S * (A - 1) > 8)
    throw std::invalid_argument("grid minimizer limited to S*(A-1) <= 8 parameters");
  int k = static_cast<int>(std::lround(1.0 / opts.grid_step));
  if (k < 1 || std::abs(k * opts.grid_step - 1.0) > 1e-9)
    throw std::invalid_argument("grid step must divide 1 evenly");

  std::vector<std::vector<double>> rows;
  lattice_rows(k, A, rows);
  const long per_state = static_cast<long>(rows.size());
  long total = 1;
  for (int s = 0; s < S; ++s) total *= per_state;

  OptimizerReport rep;
  rep.method = "grid+pattern-search";
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_probs = Eigen::MatrixXd::Constant(S, A, 1.0 / A);
  Eigen::MatrixXd probs(S, A);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int s = 0; s < S; ++s) {
      const auto& row = rows[rem % per_state];
      rem /= per_state;
      for (int a = 0; a < A; ++a) probs(s, a) = row[a];
    }
    double g = g_of_probs(m, probs);
    if (g < best) {
      best = g;
      best_probs = probs;
      rep.trace.push_back(g);
    }
  }

  // Pattern search around the best grid cell, shrinking the stencil.
  double delta = 0.5 * opts.grid_step;
  for (int round = 0; round < opts.refine_rounds && delta > 1e-9; ++round) {
    bool improved = false;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b) {
          if (a == b) continue;
          // move delta of mass from action b to action a at state s
          if (best_probs(s, b) < delta) continue;
          Eigen::MatrixXd cand = best_probs;
          cand(s, b) -= delta;
          cand(s, a) += delta;
          double g = g_of_probs(m, cand);
          if (g < best - 1e-13) {
            best = g;
            best_probs = cand;
            improved = true;
          }
        }
    if (!improved) delta *= 0.5;
    rep.trace.push_back(best);
  }

  rep.policy = TabularPolicy::from_probs(best_probs);
  rep.objective = best;
  rep.iterations = static_cast<int>(total);
  rep.converged = std::isfinite(best);
  return rep;
}

}  // namespace rfx
