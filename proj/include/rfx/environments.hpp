#pragma once

#include "rfx/mdp.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rfx {

// Deterministic five-state chain with two actions: the first action always
// resets to state 0, the second advances one state and self-loops at the
// end of the chain. Start state is state 0.
DiscountedCmp five_state_chain(double gamma);

// The fixed 2-state 2-action instance used in the search experiments:
// P(s1|s,a) rows (1.0, 0.9, 1.0, 0.4) in (s1,a1),(s1,a2),(s2,a1),(s2,a2)
// order, start concentrated on s1.
DiscountedCmp appendix_b_cmp(double gamma = 0.9);

// 11x11 four-room grid world, deterministic moves {up,down,left,right},
// bumping into a wall or the border stays put. States are the open cells,
// start is the top-left cell.
DiscountedCmp four_rooms(double gamma = 0.995);

// Open-cell count of the four-room layout (kept next to the builder so
// tests do not hardcode the wall geometry twice).
int four_rooms_cell_count();

// Random CMP with Dirichlet(concentration) transition rows and init.
DiscountedCmp random_cmp(int n_states, int n_actions, double gamma,
                         std::uint64_t seed, double concentration = 1.0);

// Episodic variant: independent Dirichlet rows per step.
EpisodicMdp random_episodic_mdp(int n_states, int n_actions, int horizon,
                                std::uint64_t seed, double concentration = 1.0);

// Repeats a stationary CMP's dynamics for H steps.
EpisodicMdp episodic_from_cmp(const DiscountedCmp& m, int horizon);

// ---- 2-state 2-action grid enumeration -------------------------------

// Number of grid points per axis for `step`; throws unless step divides 1.
int grid_points_per_axis(double step);

// Total CMPs on the 5-parameter grid {0, step, ..., 1}^5.
long enumerate_cmps_count(double step);

// The five grid parameters (4x P(s1|s,a), then mu(s1)) of grid cell idx.
std::array<double, 5> grid_params(double step, long idx);

DiscountedCmp cmp_from_grid_index(double step, long idx, double gamma);

// Materializes the whole grid; intended for small steps in tests.
std::vector<DiscountedCmp> enumerate_cmps(double step, double gamma = 0.9);

// ---- brute-force search ------------------------------------------------

struct SearchRow {
  std::array<double, 5> params;
  double g_shannon = 0.0;
  double g_renyi = 0.0;
  double gap = 0.0;  // g_shannon - g_renyi
  bool skipped = false;
};

struct SearchReport {
  long n_cmps = 0;
  long n_counterexamples = 0;
  long n_skipped = 0;
  double worst_gap = 0.0;  // smallest observed gap among unskipped CMPs
  std::vector<SearchRow> rows;
};

struct SearchOptions {
  int workers = 1;
  double tol = 1e-6;
  bool keep_rows = true;
  std::string csv_path;      // written when nonempty
  std::string summary_path;  // JSON summary, written when nonempty
};

// For every CMP on the grid, maximizes H_alpha and H_1, evaluates the
// coupon-collector objective of both optima, and counts CMPs where the
// Shannon maximizer strictly beats the Renyi maximizer. CMPs with
// structurally unreachable pairs (G infinite under every policy) are
// skipped and tallied separately.
SearchReport brute_force_compare(double step, double alpha, double gamma,
                                 const SearchOptions& opts = {});

// Named environment registry used by the CLI: five-state | appendix-b |
// four-rooms | random.
struct EnvParams {
  double gamma = 0.9;
  int n_states = 4;
  int n_actions = 2;
  std::uint64_t seed = 0;
  double concentration = 1.0;
};
DiscountedCmp build_env(const std::string& name, const EnvParams& params);

}  // namespace rfx
