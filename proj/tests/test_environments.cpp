#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "rfx/entropy.hpp"
#include "rfx/environments.hpp"
#include "rfx/mdp.hpp"

using namespace rfx;

namespace {

// Independent reconstruction of the grid-world cell numbering: row-major scan
// over open cells of the 11x11 layout with a cross of walls and two doors per
// wall segment.
bool open_cell(int r, int c) {
  if (c == 5 && r != 2 && r != 8) return false;
  if (r == 5 && c != 2 && c != 8) return false;
  return true;
}

int cell_id(int r, int c) {
  int id = 0;
  for (int rr = 0; rr < 11; ++rr)
    for (int cc = 0; cc < 11; ++cc) {
      if (rr == r && cc == c) return id;
      if (open_cell(rr, cc)) ++id;
    }
  return -1;
}

}  // namespace

TEST_SUITE("environments") {

TEST_CASE("five-state chain wiring") {
  DiscountedCmp m = five_state_chain(1.0);
  CHECK(m.n_states == 5);
  CHECK(m.n_actions == 2);
  CHECK(m.gamma == 1.0);
  CHECK_NOTHROW(validate(m));
  for (int s = 0; s < 5; ++s) {
    CHECK(m.p(s, 0, 0) == 1.0);            // reset action returns to the head
    int next = std::min(s + 1, 4);          // advance action walks the chain
    CHECK(m.p(s, 1, next) == 1.0);
  }
  CHECK(m.init[0] == 1.0);
}

TEST_CASE("two-state appendix model wiring") {
  DiscountedCmp m = appendix_b_cmp();
  CHECK(m.n_states == 2);
  CHECK(m.n_actions == 2);
  CHECK(m.gamma == doctest::Approx(0.9));
  CHECK_NOTHROW(validate(m));
  const double stay[4] = {1.0, 0.9, 1.0, 0.4};  // P(s1 | s, a) by pair
  int k = 0;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) {
      CHECK(m.p(s, a, 0) == doctest::Approx(stay[k]));
      CHECK(m.p(s, a, 1) == doctest::Approx(1.0 - stay[k]));
      ++k;
    }
  CHECK(m.init[0] == 1.0);
  CHECK(m.init[1] == 0.0);
}

TEST_CASE("grid world layout and movement") {
  DiscountedCmp m = four_rooms(0.995);
  CHECK(four_rooms_cell_count() == 104);
  CHECK(m.n_states == 104);
  CHECK(m.n_actions == 4);
  CHECK_NOTHROW(validate(m));
  CHECK(m.init[cell_id(0, 0)] == 1.0);

  enum { up = 0, down = 1, left = 2, right = 3 };
  // corner moves bump into the boundary and stay put
  CHECK(m.p(cell_id(0, 0), up, cell_id(0, 0)) == 1.0);
  CHECK(m.p(cell_id(0, 0), left, cell_id(0, 0)) == 1.0);
  CHECK(m.p(cell_id(0, 0), right, cell_id(0, 1)) == 1.0);
  CHECK(m.p(cell_id(0, 0), down, cell_id(1, 0)) == 1.0);
  // the interior wall blocks sideways movement away from the doors
  CHECK(m.p(cell_id(1, 4), right, cell_id(1, 4)) == 1.0);
  CHECK(m.p(cell_id(4, 1), down, cell_id(4, 1)) == 1.0);
  // doors connect the rooms
  CHECK(m.p(cell_id(2, 4), right, cell_id(2, 5)) == 1.0);
  CHECK(m.p(cell_id(2, 5), right, cell_id(2, 6)) == 1.0);
  CHECK(m.p(cell_id(8, 4), right, cell_id(8, 5)) == 1.0);
  CHECK(m.p(cell_id(4, 2), down, cell_id(5, 2)) == 1.0);
  CHECK(m.p(cell_id(5, 8), down, cell_id(6, 8)) == 1.0);
}

TEST_CASE("every grid-world pair is reachable") {
  DiscountedCmp m = four_rooms(0.995);
  OccupancyMeasure d = occupancy(m, TabularPolicy::uniform(104, 4));
  CHECK(d.w.minCoeff() > 0.0);
  CHECK(d.w.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("random models are valid and seed-reproducible") {
  DiscountedCmp a = random_cmp(6, 3, 0.9, 42);
  DiscountedCmp b = random_cmp(6, 3, 0.9, 42);
  DiscountedCmp c = random_cmp(6, 3, 0.9, 43);
  CHECK_NOTHROW(validate(a));
  CHECK(a.transition == b.transition);
  CHECK(a.init == b.init);
  CHECK(a.transition != c.transition);
  // concentration shapes the rows but keeps them on the simplex
  DiscountedCmp sharp = random_cmp(6, 3, 0.9, 42, 0.05);
  CHECK_NOTHROW(validate(sharp));

  EpisodicMdp e = random_episodic_mdp(4, 2, 5, 7);
  CHECK_NOTHROW(validate(e));
  CHECK(e.horizon == 5);
}

TEST_CASE("episodic wrapper copies the stationary model to every step") {
  DiscountedCmp base = appendix_b_cmp(0.9);
  EpisodicMdp m = episodic_from_cmp(base, 4);
  CHECK(m.horizon == 4);
  CHECK_NOTHROW(validate(m));
  for (int h = 0; h < 4; ++h)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        for (int s2 = 0; s2 < 2; ++s2) CHECK(m.p(h, s, a, s2) == base.p(s, a, s2));
  CHECK(m.init == base.init);
}

TEST_CASE("environment dispatch by name") {
  EnvParams params;
  params.gamma = 0.9;
  params.n_states = 3;
  params.n_actions = 2;
  params.seed = 1;
  CHECK(build_env("five-state", params).n_states == 5);
  CHECK(build_env("appendix-b", params).n_states == 2);
  CHECK(build_env("four-rooms", params).n_states == 104);
  CHECK(build_env("random", params).n_states == 3);
  CHECK_THROWS_AS(build_env("nope", params), std::invalid_argument);
}

TEST_CASE("grid enumeration counts and decoding") {
  CHECK(grid_points_per_axis(0.5) == 3);
  CHECK(grid_points_per_axis(0.1) == 11);
  CHECK(enumerate_cmps_count(0.5) == 243);
  CHECK(enumerate_cmps_count(0.2) == 7776);
  CHECK(enumerate_cmps_count(0.1) == 161051);

  auto q0 = grid_params(0.5, 0);
  for (double v : q0) CHECK(v == 0.0);
  auto q1 = grid_params(0.5, 1);  // the last coordinate varies fastest
  CHECK(q1[4] == doctest::Approx(0.5));
  CHECK(q1[0] == 0.0);
  auto q_last = grid_params(0.5, 242);
  for (double v : q_last) CHECK(v == 1.0);

  DiscountedCmp m = cmp_from_grid_index(0.5, 121, 0.9);  // all coordinates 0.5
  CHECK_NOTHROW(validate(m));
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(m.p(s, a, 0) == doctest::Approx(0.5));
  CHECK(m.init[0] == doctest::Approx(0.5));

  auto all = enumerate_cmps(0.5);
  CHECK(all.size() == 243);
  for (const auto& cmp : all) CHECK_NOTHROW(validate(cmp));
}

TEST_CASE("coarse search finds no counterexample") {
  SearchOptions opts;
  SearchReport rep = brute_force_compare(0.5, 0.1, 0.9, opts);
  CHECK(rep.n_cmps == 243);
  CHECK(rep.n_counterexamples == 0);
  CHECK(rep.worst_gap > -1e-6);
  CHECK(rep.rows.size() == 243);

  // recount the skip rule independently: a pair missing under the uniform
  // policy dooms every policy
  long skipped = 0;
  for (long idx = 0; idx < 243; ++idx) {
    DiscountedCmp m = cmp_from_grid_index(0.5, idx, 0.9);
    if (occupancy(m, TabularPolicy::uniform(2, 2)).w.minCoeff() < 1e-12) ++skipped;
  }
  CHECK(rep.n_skipped == skipped);
  for (long idx = 0; idx < 243; ++idx) {
    DiscountedCmp m = cmp_from_grid_index(0.5, idx, 0.9);
    bool dead = occupancy(m, TabularPolicy::uniform(2, 2)).w.minCoeff() < 1e-12;
    CHECK(rep.rows[idx].skipped == dead);
  }
}

TEST_CASE("action-symmetric grid point has a zero gap") {
  SearchRow row;
  SearchOptions opts;
  SearchReport rep = brute_force_compare(0.5, 0.1, 0.9, opts);
  row = rep.rows[121];  // both actions identical, initial state fair
  CHECK(!row.skipped);
  // uniform over four pairs is optimal for every order, so both collection
  // times are the uniform coupon value
  double uniform_g = 4.0 * (1.0 + 0.5 + 1.0 / 3.0 + 0.25);
  CHECK(row.g_shannon == doctest::Approx(uniform_g).epsilon(1e-6));
  CHECK(row.g_renyi == doctest::Approx(uniform_g).epsilon(1e-6));
  CHECK(std::abs(row.gap) < 1e-6);
}

TEST_CASE("search is deterministic and worker-count independent") {
  SearchOptions one;
  one.workers = 1;
  SearchOptions three;
  three.workers = 3;
  SearchReport a = brute_force_compare(0.5, 0.1, 0.9, one);
  SearchReport b = brute_force_compare(0.5, 0.1, 0.9, one);
  SearchReport c = brute_force_compare(0.5, 0.1, 0.9, three);
  CHECK(a.worst_gap == b.worst_gap);
  CHECK(a.worst_gap == c.worst_gap);
  CHECK(a.n_skipped == c.n_skipped);
  REQUIRE(a.rows.size() == c.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].gap == b.rows[i].gap);
    CHECK(a.rows[i].gap == c.rows[i].gap);
    CHECK(a.rows[i].skipped == c.rows[i].skipped);
  }
}

TEST_CASE("search artifacts round-trip through disk") {
  SearchOptions opts;
  opts.csv_path = "search_rows_test.csv";
  opts.summary_path = "search_summary_test.json";
  SearchReport rep = brute_force_compare(0.5, 0.1, 0.9, opts);

  std::ifstream csv(opts.csv_path);
  REQUIRE(csv.good());
  std::string line;
  long lines = 0;
  std::getline(csv, line);
  CHECK(line ==
        "p_s1_a1,p_s1_a2,p_s2_a1,p_s2_a2,mu_s1,g_shannon,g_renyi,gap,skipped");
  while (std::getline(csv, line))
    if (!line.empty()) ++lines;
  CHECK(lines == rep.n_cmps);

  std::ifstream js(opts.summary_path);
  REQUIRE(js.good());
  nlohmann::json j = nlohmann::json::parse(js);
  CHECK(j["n_cmps"].get<long>() == rep.n_cmps);
  CHECK(j["n_counterexamples"].get<long>() == 0);
  CHECK(j["n_skipped"].get<long>() == rep.n_skipped);
  CHECK(j["worst_gap"].get<double>() == doctest::Approx(rep.worst_gap));
  CHECK(j["alpha"].get<double>() == doctest::Approx(0.1));

  std::remove(opts.csv_path.c_str());
  std::remove(opts.summary_path.c_str());
}

}  // TEST_SUITE
