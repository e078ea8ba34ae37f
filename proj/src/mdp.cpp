#include "rfx/mdp.hpp"

#include <cmath>
#include <sstream>

namespace rfx {

namespace {

constexpr double kRowTol = 1e-12;

std::optional<ValidationIssue> check_rows(const std::vector<double>& t, int S, int A,
                                          int h) {
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        double v = t[(static_cast<std::size_t>(s) * A + a) * S + s2];
        if (v < 0.0) {
          std::ostringstream os;
          os << "negative transition probability at (s=" << s << ", a=" << a;
          if (h >= 0) os << ", h=" << h + 1;
          os << ")";
          return ValidationIssue{os.str(), s, a, h, v};
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowTol) {
        std::ostringstream os;
        os << "transition row (s=" << s << ", a=" << a;
        if (h >= 0) os << ", h=" << h + 1;
        os << ") sums to " << sum;
        return ValidationIssue{os.str(), s, a, h, sum};
      }
    }
  }
  return std::nullopt;
}

std::optional<ValidationIssue> check_init(const std::vector<double>& mu, int S) {
  double sum = 0.0;
  for (int s = 0; s < S; ++s) {
    if (mu[s] < 0.0)
      return ValidationIssue{"negative initial probability at s=" + std::to_string(s),
                             s, -1, -1, mu[s]};
    sum += mu[s];
  }
  if (std::abs(sum - 1.0) > kRowTol) {
    std::ostringstream os;
    os << "init sums to " << sum;
    return ValidationIssue{os.str(), -1, -1, -1, sum};
  }
  return std::nullopt;
}

}  // namespace

std::optional<ValidationIssue> check(const DiscountedCmp& m) {
  if (m.n_states < 1 || m.n_actions < 1)
    return ValidationIssue{"n_states and n_actions must be positive"};
  if (m.gamma <= 0.0 || m.gamma > 1.0)
    return ValidationIssue{"gamma must lie in (0, 1]"};
  if (m.transition.size() != static_cast<std::size_t>(m.n_pairs()) * m.n_states)
    return ValidationIssue{"transition tensor has wrong size"};
  if (m.init.size() != static_cast<std::size_t>(m.n_states))
    return ValidationIssue{"init has wrong size"};
  if (auto bad = check_rows(m.transition, m.n_states, m.n_actions, -1)) return bad;
  return check_init(m.init, m.n_states);
}

std::optional<ValidationIssue> check(const EpisodicMdp& m) {
  if (m.n_states < 1 || m.n_actions < 1)
    return ValidationIssue{"n_states and n_actions must be positive"};
  if (m.horizon < 1) return ValidationIssue{"horizon must be at least 1"};
  if (m.transition_per_step.size() != static_cast<std::size_t>(m.horizon))
    return ValidationIssue{"need one transition tensor per step"};
  for (int h = 0; h < m.horizon; ++h) {
    if (m.transition_per_step[h].size() !=
        static_cast<std::size_t>(m.n_pairs()) * m.n_states)
      return ValidationIssue{"transition tensor at h=" + std::to_string(h + 1) +
                                 " has wrong size",
                             -1, -1, h};
    if (auto bad = check_rows(m.transition_per_step[h], m.n_states, m.n_actions, h))
      return bad;
  }
  if (m.init.size() != static_cast<std::size_t>(m.n_states))
    return ValidationIssue{"init has wrong size"};
  return check_init(m.init, m.n_states);
}

void validate(const DiscountedCmp& m) {
  if (auto bad = check(m)) throw ValidationError(*bad);
}

void validate(const EpisodicMdp& m) {
  if (auto bad = check(m)) throw ValidationError(*bad);
}

Eigen::MatrixXd TabularPolicy::probs() const {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index s = 0; s < p.rows(); ++s) {
    double mx = p.row(s).maxCoeff();
    p.row(s) = (p.row(s).array() - mx).exp();
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

TabularPolicy TabularPolicy::from_probs(const Eigen::MatrixXd& probs) {
  TabularPolicy pol;
  pol.logits = probs.array().max(1e-300).log().matrix();
  return pol;
}

Eigen::MatrixXd NonStationaryPolicy::probs(int h) const {
  TabularPolicy slice;
  slice.logits = logits[h];
  return slice.probs();
}

Eigen::MatrixXd induced_chain(const DiscountedCmp& m, const TabularPolicy& pi) {
  return induced_chain(m, pi.probs());
}

Eigen::MatrixXd induced_chain(const DiscountedCmp& m, const Eigen::MatrixXd& P) {
  const int S = m.n_states, A = m.n_actions, n = m.n_pairs();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int s2 = 0; s2 < S; ++s2) {
        double tp = m.p(s, a, s2);
        if (tp == 0.0) continue;
        for (int a2 = 0; a2 < A; ++a2)
          M(s * A + a, s2 * A + a2) = tp * P(s2, a2);
      }
  return M;
}

namespace {

Eigen::VectorXd stationary_of(const Eigen::MatrixXd& M) {
  const auto n = M.rows();
  // Kernel of (M^T - I); a unique stationary distribution means a
  // one-dimensional kernel containing a nonnegative vector.
  Eigen::MatrixXd K = M.transpose() - Eigen::MatrixXd::Identity(n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  lu.setThreshold(1e-9);
  if (lu.dimensionOfKernel() != 1)
    throw SingularSystemError(
        "induced chain at gamma=1 has no unique stationary distribution "
        "(kernel dimension " +
        std::to_string(lu.dimensionOfKernel()) + ")");
  Eigen::VectorXd v = lu.kernel().col(0);
  if (v.sum() < 0) v = -v;
  double neg = v.minCoeff();
  if (neg < -1e-9 * v.cwiseAbs().maxCoeff())
    throw SingularSystemError(
        "stationary solve produced a sign-indefinite kernel vector");
  v = v.cwiseMax(0.0);
  v /= v.sum();
  // One refinement step of d <- M^T d tightens the LU kernel estimate.
  v = M.transpose() * v;
  v /= v.sum();
  return v;
}

}  // namespace

OccupancyMeasure occupancy(const DiscountedCmp& m, const TabularPolicy& pi,
                           std::optional<std::pair<int, int>> start) {
  return occupancy(m, pi.probs(), start);
}

OccupancyMeasure occupancy(const DiscountedCmp& m, const Eigen::MatrixXd& P,
                           std::optional<std::pair<int, int>> start) {
  validate(m);
  const int A = m.n_actions, n = m.n_pairs();
  Eigen::MatrixXd M = induced_chain(m, P);

  OccupancyMeasure d;
  d.n_states = m.n_states;
  d.n_actions = A;

  if (m.gamma == 1.0) {
    // Stationary distribution of the induced chain; independent of the
    // start, which is the point of the gamma -> 1 limit.
    d.w = stationary_of(M);
    return d;
  }

  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  if (start) {
    e[start->first * A + start->second] = 1.0;
  } else {
    for (int s = 0; s < m.n_states; ++s)
      for (int a = 0; a < A; ++a) e[s * A + a] = m.init[s] * P(s, a);
  }
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - m.gamma * M.transpose();
  d.w = lhs.partialPivLu().solve((1.0 - m.gamma) * e);
  return d;
}

Eigen::MatrixXd occupancy_all_starts(const DiscountedCmp& m, const TabularPolicy& pi) {
  validate(m);
  const int n = m.n_pairs();
  Eigen::MatrixXd M = induced_chain(m, pi);
  if (m.gamma == 1.0) {
    Eigen::VectorXd st = stationary_of(M);
    return st.replicate(1, n);
  }
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - m.gamma * M.transpose();
  return lhs.partialPivLu().solve((1.0 - m.gamma) *
                                  Eigen::MatrixXd::Identity(n, n));
}

OccupancyMeasure state_marginal(const OccupancyMeasure& d) {
  if (d.state_only) throw std::invalid_argument("measure is already state-only");
  OccupancyMeasure m;
  m.n_states = d.n_states;
  m.n_actions = d.n_actions;
  m.state_only = true;
  m.w = Eigen::VectorXd::Zero(d.n_states);
  for (int s = 0; s < d.n_states; ++s)
    for (int a = 0; a < d.n_actions; ++a) m.w[s] += d.at(s, a);
  return m;
}

OccupancyMeasure episodic_step_distribution(const EpisodicMdp& m,
                                            const NonStationaryPolicy& pi, int h) {
  validate(m);
  if (h < 1 || h > m.horizon)
    throw std::out_of_range("step " + std::to_string(h) + " outside 1.." +
                            std::to_string(m.horizon));
  const int S = m.n_states, A = m.n_actions;
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(m.init.data(), S);
  for (int t = 0; t < h - 1; ++t) {
    Eigen::MatrixXd P = pi.probs(t);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
      if (x[s] == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        double w = x[s] * P(s, a);
        if (w == 0.0) continue;
        for (int s2 = 0; s2 < S; ++s2) next[s2] += w * m.p(t, s, a, s2);
      }
    }
    x = next;
  }
  Eigen::MatrixXd P = pi.probs(h - 1);
  OccupancyMeasure d;
  d.n_states = S;
  d.n_actions = A;
  d.w = Eigen::VectorXd::Zero(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) d.w[s * A + a] = x[s] * P(s, a);
  return d;
}

TabularPolicy policy_from_occupancy(const OccupancyMeasure& d) {
  if (d.state_only) throw std::invalid_argument("need a state-action measure");
  Eigen::MatrixXd probs(d.n_states, d.n_actions);
  for (int s = 0; s < d.n_states; ++s) {
    double ds = 0.0;
    for (int a = 0; a < d.n_actions; ++a) ds += d.at(s, a);
    if (ds <= 0.0) {
      probs.row(s).setConstant(1.0 / d.n_actions);
    } else {
      for (int a = 0; a < d.n_actions; ++a) probs(s, a) = d.at(s, a) / ds;
    }
  }
  return TabularPolicy::from_probs(probs);
}

double max_reach(const EpisodicMdp& m, int s, int a, int h) {
  validate(m);
  if (s < 0 || s >= m.n_states || a < 0 || a >= m.n_actions || h < 1 || h > m.horizon)
    throw std::out_of_range("max_reach indices out of range");
  const int S = m.n_states, A = m.n_actions;
  // r[t][x] = best probability of standing at s on step h given state x at
  // step t+1. The action at step h itself is free.
  Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
  r[s] = 1.0;
  for (int t = h - 2; t >= 0; --t) {
    Eigen::VectorXd prev(S);
    for (int x = 0; x < S; ++x) {
      double best = 0.0;
      for (int b = 0; b < A; ++b) {
        double v = 0.0;
        for (int x2 = 0; x2 < S; ++x2) v += m.p(t, x, b, x2) * r[x2];
        if (v > best) best = v;
      }
      prev[x] = best;
    }
    r = prev;
  }
  double out = 0.0;
  for (int x = 0; x < S; ++x) out += m.init[x] * r[x];
  return out;
}

}  // namespace rfx
