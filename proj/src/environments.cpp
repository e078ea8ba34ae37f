#include "rfx/environments.hpp"

#include "rfx/entropy.hpp"
#include "rfx/parallel.hpp"
#include "rfx/rng.hpp"
#include "rfx/solvers.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rfx {

DiscountedCmp five_state_chain(double gamma) {
  DiscountedCmp m;
  m.n_states = 5;
  m.n_actions = 2;
  m.gamma = gamma;
  m.transition.assign(5 * 2 * 5, 0.0);
  m.init.assign(5, 0.0);
  m.init[0] = 1.0;
  for (int s = 0; s < 5; ++s) {
    m.p(s, 0, 0) = 1.0;                    // reset action
    m.p(s, 1, s < 4 ? s + 1 : 4) = 1.0;    // advance, self-loop at the end
  }
  return m;
}

DiscountedCmp appendix_b_cmp(double gamma) {
  DiscountedCmp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.gamma = gamma;
  m.transition.assign(2 * 2 * 2, 0.0);
  const double rows[4] = {1.0, 0.9, 1.0, 0.4};  // P(s1 | s,a)
  int k = 0;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) {
      m.p(s, a, 0) = rows[k];
      m.p(s, a, 1) = 1.0 - rows[k];
      ++k;
    }
  m.init = {1.0, 0.0};
  return m;
}

namespace {

constexpr int kGrid = 11;

bool open_cell(int r, int c) {
  if (r < 0 || r >= kGrid || c < 0 || c >= kGrid) return false;
  if (c == 5 && r != 2 && r != 8) return false;  // vertical wall, two doors
  if (r == 5 && c != 2 && c != 8) return false;  // horizontal wall, two doors
  return true;
}

}  // namespace

int four_rooms_cell_count() {
  int n = 0;
  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c)
      if (open_cell(r, c)) ++n;
  return n;
}

DiscountedCmp four_rooms(double gamma) {
  std::vector<int> id(kGrid * kGrid, -1);
  int n = 0;
  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c)
      if (open_cell(r, c)) id[r * kGrid + c] = n++;

  DiscountedCmp m;
  m.n_states = n;
  m.n_actions = 4;
  m.gamma = gamma;
  m.transition.assign(static_cast<std::size_t>(n) * 4 * n, 0.0);
  m.init.assign(n, 0.0);
  m.init[0] = 1.0;  // top-left open cell

  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c) {
      int s = id[r * kGrid + c];
      if (s < 0) continue;
      for (int a = 0; a < 4; ++a) {
        int r2 = r + dr[a], c2 = c + dc[a];
        int s2 = open_cell(r2, c2) ? id[r2 * kGrid + c2] : s;
        m.p(s, a, s2) = 1.0;
      }
    }
  return m;
}

namespace {

// Marsaglia-Tsang; falls back through the c+1 boost for c < 1.
double gamma_sample(Rng& rng, double c) {
  if (c < 1.0) {
    double u = rng.uniform();
    while (u <= 1e-300) u = rng.uniform();
    return gamma_sample(rng, c + 1.0) * std::pow(u, 1.0 / c);
  }
  double d = c - 1.0 / 3.0;
  double cc = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double v = 1.0 + cc * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 1e-300 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

void dirichlet_row(Rng& rng, double conc, double* out, int n) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = gamma_sample(rng, conc);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
}

}  // namespace

DiscountedCmp random_cmp(int n_states, int n_actions, double gamma,
                         std::uint64_t seed, double concentration) {
  Rng rng(seed);
  DiscountedCmp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.transition.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      dirichlet_row(rng, concentration, &m.p(s, a, 0), n_states);
  m.init.resize(n_states);
  dirichlet_row(rng, concentration, m.init.data(), n_states);
  return m;
}

EpisodicMdp random_episodic_mdp(int n_states, int n_actions, int horizon,
                                std::uint64_t seed, double concentration) {
  Rng rng(seed);
  EpisodicMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.horizon = horizon;
  m.transition_per_step.resize(horizon);
  for (int h = 0; h < horizon; ++h) {
    auto& t = m.transition_per_step[h];
    t.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a)
        dirichlet_row(rng, concentration,
                      &t[(static_cast<std::size_t>(s) * n_actions + a) * n_states],
                      n_states);
  }
  m.init.resize(n_states);
  dirichlet_row(rng, concentration, m.init.data(), n_states);
  return m;
}

EpisodicMdp episodic_from_cmp(const DiscountedCmp& m, int horizon) {
  EpisodicMdp e;
  e.n_states = m.n_states;
  e.n_actions = m.n_actions;
  e.horizon = horizon;
  e.transition_per_step.assign(horizon, m.transition);
  e.init = m.init;
  return e;
}

int grid_points_per_axis(double step) {
  if (step <= 0.0 || step > 1.0) throw std::invalid_argument("step must be in (0,1]");
  int k = static_cast<int>(std::lround(1.0 / step));
  if (std::abs(k * step - 1.0) > 1e-9)
    throw std::invalid_argument("step must divide 1 evenly");
  return k + 1;
}

long enumerate_cmps_count(double step) {
  long n = grid_points_per_axis(step);
  return n * n * n * n * n;
}

std::array<double, 5> grid_params(double step, long idx) {
  const int n = grid_points_per_axis(step);
  std::array<double, 5> out{};
  for (int i = 4; i >= 0; --i) {
    out[i] = static_cast<double>(idx % n) / (n - 1);
    idx /= n;
  }
  return out;
}

DiscountedCmp cmp_from_grid_index(double step, long idx, double gamma) {
  auto q = grid_params(step, idx);
  DiscountedCmp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.gamma = gamma;
  m.transition.assign(8, 0.0);
  for (int k = 0; k < 4; ++k) {
    m.transition[2 * k] = q[k];
    m.transition[2 * k + 1] = 1.0 - q[k];
  }
  m.init = {q[4], 1.0 - q[4]};
  return m;
}

std::vector<DiscountedCmp> enumerate_cmps(double step, double gamma) {
  long total = enumerate_cmps_count(step);
  std::vector<DiscountedCmp> out;
  out.reserve(total);
  for (long i = 0; i < total; ++i) out.push_back(cmp_from_grid_index(step, i, gamma));
  return out;
}

namespace {

// Collection time of the policy's normalized occupancy.
double collection_time_of(const DiscountedCmp& m, const TabularPolicy& pi) {
  Eigen::VectorXd d = occupancy(m, pi).w.cwiseMax(0.0);
  d /= d.sum();
  return coupon_collector(d, CouponMethod::inclusion_exclusion).value;
}

SearchRow evaluate_grid_cmp(double step, long idx, double alpha, double gamma,
                            double tol) {
  (void)tol;
  SearchRow row;
  row.params = grid_params(step, idx);
  DiscountedCmp m = cmp_from_grid_index(step, idx, gamma);
  // the uniform policy visits every pair that any policy can visit, so a
  // vanishing entry here means the collection time is infinite for all
  // policies
  try {
    OccupancyMeasure probe = occupancy(m, TabularPolicy::uniform(2, 2));
    if (probe.w.minCoeff() < 1e-12) {
      row.skipped = true;
      return row;
    }
  } catch (const SingularSystemError&) {
    row.skipped = true;
    return row;
  }
  SolveOptions sopts;
  sopts.tol = 1e-8;
  sopts.restarts = 2;
  sopts.seed = static_cast<unsigned>(idx);
  OptimizerReport shannon =
      maximize_entropy(m, 1.0, SolveMethod::gradient_ascent, sopts);
  OptimizerReport renyi =
      maximize_entropy(m, alpha, SolveMethod::gradient_ascent, sopts);
  row.g_shannon = collection_time_of(m, shannon.policy);
  row.g_renyi = collection_time_of(m, renyi.policy);
  row.gap = row.g_shannon - row.g_renyi;
  return row;
}

void write_search_csv(const std::string& path, const std::vector<SearchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "p_s1_a1,p_s1_a2,p_s2_a1,p_s2_a2,mu_s1,g_shannon,g_renyi,gap,skipped\n";
  out.precision(12);
  for (const SearchRow& r : rows) {
    for (double p : r.params) out << p << ',';
    if (r.skipped)
      out << "nan,nan,nan,1\n";
    else
      out << r.g_shannon << ',' << r.g_renyi << ',' << r.gap << ",0\n";
  }
}

void write_search_summary(const std::string& path, const SearchReport& rep,
                          double step, double alpha, double gamma, double tol) {
  nlohmann::json j;
  j["step"] = step;
  j["alpha"] = alpha;
  j["gamma"] = gamma;
  j["tolerance"] = tol;
  j["n_cmps"] = rep.n_cmps;
  j["n_counterexamples"] = rep.n_counterexamples;
  j["n_skipped"] = rep.n_skipped;
  j["worst_gap"] = rep.worst_gap;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

SearchReport brute_force_compare(double step, double alpha, double gamma,
                                 const SearchOptions& opts) {
  const long total = enumerate_cmps_count(step);
  const int workers = std::max(1, opts.workers);
  std::vector<std::vector<SearchRow>> blocks(workers);
  parallel_blocks(total, workers, [&](long lo, long hi, int w) {
    blocks[w].reserve(hi - lo);
    for (long idx = lo; idx < hi; ++idx)
      blocks[w].push_back(evaluate_grid_cmp(step, idx, alpha, gamma, opts.tol));
  });

  SearchReport rep;
  rep.n_cmps = total;
  rep.worst_gap = std::numeric_limits<double>::infinity();
  for (const auto& block : blocks)
    for (const SearchRow& row : block) {
      if (row.skipped) {
        ++rep.n_skipped;
      } else {
        if (row.gap < -opts.tol) ++rep.n_counterexamples;
        rep.worst_gap = std::min(rep.worst_gap, row.gap);
      }
      if (opts.keep_rows) rep.rows.push_back(row);
    }

  if (!opts.csv_path.empty()) {
    std::vector<SearchRow> all;
    if (opts.keep_rows) {
      write_search_csv(opts.csv_path, rep.rows);
    } else {
      for (auto& block : blocks)
        all.insert(all.end(), block.begin(), block.end());
      write_search_csv(opts.csv_path, all);
    }
  }
  if (!opts.summary_path.empty())
    write_search_summary(opts.summary_path, rep, step, alpha, gamma, opts.tol);
  return rep;
}

DiscountedCmp build_env(const std::string& name, const EnvParams& params) {
  if (name == "five-state") return five_state_chain(params.gamma);
  if (name == "appendix-b") return appendix_b_cmp(params.gamma);
  if (name == "four-rooms") return four_rooms(params.gamma);
  if (name == "random")
    return random_cmp(params.n_states, params.n_actions, params.gamma, params.seed,
                      params.concentration);
  throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace rfx
