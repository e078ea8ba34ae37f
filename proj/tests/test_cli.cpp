#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "rfx/environments.hpp"
#include "rfx/io.hpp"
#include "rfx/mdp.hpp"
#include "rfx/pipeline.hpp"
#include "rfx/rng.hpp"

using namespace rfx;

namespace {

// Fresh scratch directory per case; ctest runs from the build tree so
// relative paths stay out of the sources.
struct Scratch {
  std::filesystem::path dir;
  explicit Scratch(const std::string& name) : dir("cli_scratch_" + name) {
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~Scratch() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& file) const { return (dir / file).string(); }
  std::string str() const { return dir.string(); }
};

int run(const std::vector<std::string>& args, std::string* capture = nullptr) {
  std::ostringstream out;
  int code = cli::run_cli(args, out);
  if (capture) *capture = out.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

long count_lines(const std::string& text) {
  long n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Pulls "key=value" off a RESULT line.
std::string result_field(const std::string& text, const std::string& key) {
  auto pos = text.rfind(key + "=");
  REQUIRE(pos != std::string::npos);
  pos += key.size() + 1;
  auto end = text.find_first_of(" \n", pos);
  return text.substr(pos, end - pos);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("dataset files round-trip exactly") {
  Scratch tmp("dataset");
  DiscountedCmp env = five_state_chain(0.9);
  Rng rng(5);
  TransitionDataset ds =
      collect_dataset(env, TabularPolicy::uniform(5, 2), 40, rng, 150);
  ds.seed = 5;
  ds.source = "uniform policy";
  save_dataset(tmp.path("d.jsonl"), ds);
  TransitionDataset back = load_dataset(tmp.path("d.jsonl"));
  CHECK(back.n_states == ds.n_states);
  CHECK(back.n_actions == ds.n_actions);
  CHECK(back.horizon == ds.horizon);
  CHECK(back.gamma == doctest::Approx(ds.gamma).epsilon(1e-12));
  CHECK(back.source == ds.source);
  CHECK(back.n_trajectories == ds.n_trajectories);
  CHECK(back.seed == ds.seed);
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].s == ds.records[i].s);
    CHECK(back.records[i].a == ds.records[i].a);
    CHECK(back.records[i].s2 == ds.records[i].s2);
    CHECK(back.records[i].h == ds.records[i].h);
  }

  // Episodic variant keeps step indices and mixture bookkeeping.
  EpisodicMdp epi = episodic_from_cmp(env, 3);
  PolicyMixture mix;
  mix.policies.push_back(NonStationaryPolicy::uniform(3, 5, 2));
  mix.policies.push_back(NonStationaryPolicy::uniform(3, 5, 2));
  mix.labels = {"a", "b"};
  Rng rng2(6);
  TransitionDataset eds = collect_dataset(epi, mix, 30, rng2);
  save_dataset(tmp.path("e.jsonl"), eds);
  TransitionDataset eback = load_dataset(tmp.path("e.jsonl"));
  CHECK(eback.horizon == 3);
  CHECK(eback.selection_counts == eds.selection_counts);
  REQUIRE(eback.records.size() == 90);
  CHECK(eback.records[0].h == 1);
  CHECK(eback.records[2].h == 3);
}

TEST_CASE("reward and policy files round-trip") {
  Scratch tmp("reward");
  RewardFn pair = RewardFn::single_pair(4, 3, 2, 1);
  save_reward(tmp.path("pair.json"), pair);
  RewardFn pair_back = load_reward(tmp.path("pair.json"));
  CHECK(pair_back.is_stationary());
  CHECK((pair_back.at_step(1) - pair.at_step(1)).cwiseAbs().maxCoeff() == 0.0);

  std::vector<Eigen::MatrixXd> steps = {Eigen::MatrixXd::Random(3, 2).cwiseAbs(),
                                        Eigen::MatrixXd::Random(3, 2).cwiseAbs()};
  RewardFn per = RewardFn::per_step(steps);
  save_reward(tmp.path("per.json"), per);
  RewardFn per_back = load_reward(tmp.path("per.json"));
  CHECK_FALSE(per_back.is_stationary());
  REQUIRE(per_back.steps() == 2);
  for (int h = 1; h <= 2; ++h)
    CHECK((per_back.at_step(h) - per.at_step(h)).cwiseAbs().maxCoeff() < 1e-12);

  TabularPolicy flat = TabularPolicy::from_probs(
      (Eigen::MatrixXd(2, 2) << 0.3, 0.7, 0.9, 0.1).finished());
  save_policy(tmp.path("flat.json"), flat);
  CHECK_FALSE(policy_file_is_episodic(tmp.path("flat.json")));
  TabularPolicy flat_back = load_stationary_policy(tmp.path("flat.json"));
  CHECK((flat_back.probs() - flat.probs()).cwiseAbs().maxCoeff() < 1e-12);

  NonStationaryPolicy deep = NonStationaryPolicy::uniform(3, 2, 2);
  deep.logits[1](0, 0) = 2.5;
  save_policy(tmp.path("deep.json"), deep);
  CHECK(policy_file_is_episodic(tmp.path("deep.json")));
  NonStationaryPolicy deep_back = load_episodic_policy(tmp.path("deep.json"));
  REQUIRE(deep_back.horizon() == 3);
  for (int h = 0; h < 3; ++h)
    CHECK((deep_back.probs(h) - deep.probs(h)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(load_stationary_policy(tmp.path("deep.json")));
}

TEST_CASE("checkpoint and metrics files round-trip") {
  Scratch tmp("ckpt");
  TabularPolicy pi = TabularPolicy::from_probs(
      (Eigen::MatrixXd(2, 3) << 0.2, 0.5, 0.3, 0.6, 0.1, 0.3).finished());
  TabularValueFn value;
  value.v = (Eigen::VectorXd(2) << 1.25, -0.5).finished();
  Eigen::MatrixXd counts = (Eigen::MatrixXd(2, 3) << 4, 0, 1, 2, 9, 3).finished();
  save_checkpoint(tmp.path("c.json"), pi, value, counts);
  Checkpoint back = load_checkpoint(tmp.path("c.json"));
  CHECK((back.policy.probs() - pi.probs()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.value.v - value.v).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.counts - counts).cwiseAbs().maxCoeff() == 0.0);

  IterationMetrics m1;
  m1.iter = 0;
  m1.exact_entropy = 1.5;
  m1.mc_entropy = std::numeric_limits<double>::quiet_NaN();
  m1.mean_traj_len = 10.0;
  m1.policy_kl = 0.01;
  m1.value_loss = 2.0;
  IterationMetrics m2 = m1;
  m2.iter = 1;
  m2.mc_entropy = 1.49;
  write_metrics_csv(tmp.path("m.csv"), {m1, m2});
  std::string text = slurp(tmp.path("m.csv"));
  CHECK(text.rfind("iter,exact_entropy,mc_entropy,mean_traj_len,policy_kl,value_loss",
                   0) == 0);
  CHECK(text.find("0,1.5,nan,10,") != std::string::npos);
  CHECK(text.find("1,1.5,1.49,10,") != std::string::npos);
}

TEST_CASE("manifests carry the configuration and a stable hash") {
  Scratch tmp("manifest");
  write_manifest(tmp.path("a.json"), R"({"alpha": 0.5, "m": 200})", 1.25);
  write_manifest(tmp.path("b.json"), R"({"alpha": 0.5, "m": 200})", 9.0);
  nlohmann::json a = nlohmann::json::parse(slurp(tmp.path("a.json")));
  nlohmann::json b = nlohmann::json::parse(slurp(tmp.path("b.json")));
  CHECK(a["config"]["alpha"] == 0.5);
  CHECK(a["config"]["m"] == 200);
  CHECK(a["config_hash"] == b["config_hash"]);
  CHECK(a["elapsed_seconds"] == doctest::Approx(1.25));
  CHECK(a["versions"].contains("eigen"));
  CHECK(a["finished_at"].get<std::string>().size() == 20);

  write_manifest(tmp.path("c.json"), R"({"alpha": 0.6})", 0.0);
  nlohmann::json c = nlohmann::json::parse(slurp(tmp.path("c.json")));
  CHECK(a["config_hash"] != c["config_hash"]);
}

TEST_CASE("help and usage errors map to the exit-code contract") {
  std::string out;
  CHECK(run({"--help"}, &out) == 0);
  CHECK(out.find("Subcommands") != std::string::npos);
  CHECK(run({}, &out) == 0);
  CHECK(out.find("pipeline") != std::string::npos);
  CHECK(run({"toy", "--help"}, &out) == 0);
  CHECK(out.find("--tol-policy") != std::string::npos);
  CHECK(run({"--definitely-not-a-flag"}, &out) == 2);
  CHECK(run({"frobnicate"}, &out) == 2);
  CHECK(run({"validate", "--env", "nosuch"}, &out) == 2);
  CHECK(out.find("error") != std::string::npos);
  CHECK(run({"collect", "--m", "0"}, &out) == 2);
}

TEST_CASE("bound command reports the library value") {
  std::string out;
  REQUIRE(run({"bound", "--S", "2", "--A", "2", "--H", "3", "--eps", "0.1", "--p",
               "0.1", "--alpha", "0"},
              &out) == 0);
  double printed = std::stod(result_field(out, "m"));
  double expected = theoretical_sample_bound(2, 2, 3, 0.1, 0.1, 0.0);
  CHECK(printed == doctest::Approx(expected).epsilon(1e-5));
  CHECK(expected == doctest::Approx(1.378311e6).epsilon(1e-3));

  CHECK(run({"bound", "--alpha", "1"}, &out) == 2);
  CHECK(out.find("diverges") != std::string::npos);
}

TEST_CASE("toy reproduction gates on the reference tables") {
  std::string out;
  REQUIRE(run({"toy"}, &out) == 0);
  CHECK(out.find("verdict=PASS") != std::string::npos);
  CHECK(result_field(out, "g") != "");

  // A corrupted tolerance must flip the verdict and the exit code.
  CHECK(run({"toy", "--tol-occupancy", "1e-9"}, &out) == 1);
  CHECK(out.find("verdict=FAIL") != std::string::npos);

  // Settings without reference tables run informationally.
  CHECK(run({"toy", "--alpha", "1"}, &out) == 0);
  CHECK(out.find("informational") != std::string::npos);
  CHECK(run({"toy", "--gamma", "1"}, &out) == 0);
  CHECK(out.find("informational") != std::string::npos);
  CHECK(run({"toy", "--alpha", "0.7", "--check"}, &out) == 2);
}

TEST_CASE("contour command writes the full lattice") {
  Scratch tmp("contour");
  std::string out;
  REQUIRE(run({"contour", "--k", "50", "--out-dir", tmp.str()}, &out) == 0);
  std::string csv = slurp(tmp.path("contour.csv"));
  CHECK(count_lines(csv) == 1 + 51 * 52 / 2);
  CHECK(csv.rfind("d1,d2,d3,value,objective,alpha", 0) == 0);
  // Vertices put all mass on one coordinate, so the coupon score diverges.
  CHECK(csv.find("inf") != std::string::npos);
}

TEST_CASE("search command summarizes a small grid cleanly") {
  Scratch tmp("search");
  std::string out;
  REQUIRE(run({"search", "--step", "0.5", "--out-dir", tmp.str()}, &out) == 0);
  CHECK(out.find("verdict=PASS") != std::string::npos);
  nlohmann::json summary =
      nlohmann::json::parse(slurp(tmp.path("search_summary.json")));
  CHECK(summary["n_counterexamples"] == 0);
  CHECK(summary["n_cmps"].get<long>() > 0);
  CHECK(std::filesystem::exists(tmp.path("search.csv")));
  CHECK(std::filesystem::exists(tmp.path("manifest.json")));
}

TEST_CASE("collect, plan, and evaluate chain through files") {
  Scratch tmp("flow");
  std::string out;
  REQUIRE(run({"collect", "--env", "five-state", "--gamma", "0.9", "--exploration",
               "uniform", "--m", "300", "--max-records", "400", "--seed", "3",
               "--out-dir", tmp.str()},
              &out) == 0);
  TransitionDataset ds = load_dataset(tmp.path("dataset.jsonl"));
  CHECK(ds.size() == 400);

  save_reward(tmp.path("reward.json"), RewardFn::single_pair(5, 2, 4, 1));
  REQUIRE(run({"plan", "--dataset", tmp.path("dataset.jsonl"), "--reward",
               tmp.path("reward.json"), "--method", "vi", "--out-dir", tmp.str()},
              &out) == 0);
  CHECK(out.find("value-iteration") != std::string::npos);

  REQUIRE(run({"evaluate", "--env", "five-state", "--gamma", "0.9", "--policy-file",
               tmp.path("policy.json"), "--reward", tmp.path("reward.json"),
               "--optimal", "--out-dir", tmp.str()},
              &out) == 0);
  // 400 uniform transitions cover this small chain, so planning on the
  // estimate recovers the optimal route to the rewarded pair.
  CHECK(out.find("gap = 0") != std::string::npos);
  std::string csv = slurp(tmp.path("evaluation.csv"));
  CHECK(csv.rfind("reward_id,j_planned,j_optimal,gap", 0) == 0);
  CHECK(count_lines(csv) == 2);
}

TEST_CASE("plan rejects npg on discounted datasets") {
  Scratch tmp("npg");
  std::string out;
  REQUIRE(run({"collect", "--env", "five-state", "--gamma", "0.9", "--exploration",
               "uniform", "--m", "50", "--seed", "1", "--out-dir", tmp.str()},
              &out) == 0);
  save_reward(tmp.path("reward.json"), RewardFn::single_pair(5, 2, 0, 0));
  CHECK(run({"plan", "--dataset", tmp.path("dataset.jsonl"), "--reward",
             tmp.path("reward.json"), "--method", "npg", "--out-dir", tmp.str()},
            &out) == 2);
  CHECK(out.find("episodic") != std::string::npos);
}

TEST_CASE("npg plans episodic datasets through files") {
  Scratch tmp("npgepi");
  std::string out;
  REQUIRE(run({"collect", "--env", "five-state", "--gamma", "0.9", "--horizon", "3",
               "--exploration", "uniform", "--m", "600", "--seed", "2", "--out-dir",
               tmp.str()},
              &out) == 0);
  save_reward(tmp.path("reward.json"), RewardFn::single_pair(5, 2, 2, 1));
  REQUIRE(run({"plan", "--dataset", tmp.path("dataset.jsonl"), "--reward",
               tmp.path("reward.json"), "--method", "npg", "--iters", "400",
               "--out-dir", tmp.str()},
              &out) == 0);
  REQUIRE(run({"evaluate", "--env", "five-state", "--gamma", "0.9", "--horizon", "3",
               "--policy-file", tmp.path("policy.json"), "--reward",
               tmp.path("reward.json"), "--optimal"},
              &out) == 0);
  // The rewarded pair sits two steps in, well inside the horizon; a softmax
  // policy keeps a little mass off the argmax, hence the loose gap.
  auto pos = out.rfind("gap = ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(out.substr(pos + 6)) < 0.15);
}

TEST_CASE("exact exploration pipeline closes every gap") {
  Scratch tmp("pipe");
  std::string out;
  REQUIRE(run({"pipeline", "--env", "five-state", "--gamma", "0.9", "--alpha", "0.5",
               "--exploration", "exact", "--m", "200", "--seed", "0", "--check-gaps",
               "1e-6", "--out-dir", tmp.str()},
              &out) == 0);
  CHECK(out.find("verdict=PASS") != std::string::npos);
  std::string csv = slurp(tmp.path("evaluation.csv"));
  CHECK(count_lines(csv) == 11);  // header + one row per state-action pair
  CHECK(std::stod(result_field(out, "worst_gap")) <= 1e-6);
  CHECK(std::filesystem::exists(tmp.path("dataset.jsonl")));
  CHECK(std::filesystem::exists(tmp.path("exploration_policy.json")));
  CHECK(std::filesystem::exists(tmp.path("manifest.json")));
}

TEST_CASE("undirected exploration leaves a pair uncovered at this budget") {
  // Seed pinned to a run whose 200 uniform transitions never visit the far
  // pair, so the planner has no route to it and the gap check trips.
  Scratch tmp("piperand");
  std::string out;
  CHECK(run({"pipeline", "--env", "five-state", "--gamma", "0.9", "--exploration",
             "random", "--m", "200", "--seed", "19", "--check-gaps", "1e-6",
             "--out-dir", tmp.str()},
            &out) == 1);
  CHECK(out.find("verdict=FAIL") != std::string::npos);
  CHECK(std::stod(result_field(out, "worst_gap")) > 1.0);
  CHECK(out.find("pair_s5_a2") != std::string::npos);
}

TEST_CASE("pipeline rejects an empty budget") {
  std::string out;
  CHECK(run({"pipeline", "--m", "0"}, &out) == 2);
  CHECK(out.find("empty dataset") != std::string::npos);
}

TEST_CASE("collection runs are byte-reproducible per seed") {
  Scratch tmp("repro");
  std::string out;
  std::vector<std::string> base = {"collect", "--env",     "appendix-b", "--gamma",
                                   "0.9",     "--m",       "80",         "--seed",
                                   "42",      "--out-dir", ""};
  base.back() = tmp.path("one");
  REQUIRE(run(base, &out) == 0);
  base.back() = tmp.path("two");
  REQUIRE(run(base, &out) == 0);
  CHECK(slurp(tmp.path("one") + "/dataset.jsonl") ==
        slurp(tmp.path("two") + "/dataset.jsonl"));

  base.back() = tmp.path("three");
  base[base.size() - 3] = "43";
  REQUIRE(run(base, &out) == 0);
  CHECK(slurp(tmp.path("one") + "/dataset.jsonl") !=
        slurp(tmp.path("three") + "/dataset.jsonl"));
}

TEST_CASE("config files seed options and flags override them") {
  Scratch tmp("config");
  std::ofstream(tmp.path("cfg.json")) << R"({"alpha": 1.0, "gamma": 0.99})";
  std::string out;

  // Config alone switches the run to an order with no reference tables.
  REQUIRE(run({"--config", tmp.path("cfg.json"), "toy"}, &out) == 0);
  CHECK(out.find("informational") != std::string::npos);

  // A flag beats the config, restoring the gated reproduction.
  REQUIRE(run({"--config", tmp.path("cfg.json"), "toy", "--alpha", "0.5"}, &out) == 0);
  CHECK(out.find("verdict=PASS") != std::string::npos);

  std::ofstream(tmp.path("typo.json")) << R"({"alfa": 1.0})";
  CHECK(run({"--config", tmp.path("typo.json"), "toy"}, &out) == 2);
  CHECK(out.find("unknown config key") != std::string::npos);

  std::ofstream(tmp.path("type.json")) << R"({"alpha": "half"})";
  CHECK(run({"--config", tmp.path("type.json"), "toy"}, &out) == 2);
  CHECK(out.find("wrong type") != std::string::npos);

  std::ofstream(tmp.path("broken.json")) << "{not json";
  CHECK(run({"--config", tmp.path("broken.json"), "toy"}, &out) == 2);
  CHECK(run({"--config", tmp.path("missing.json"), "toy"}, &out) == 2);
  CHECK(run({"--config", tmp.path("cfg.json")}, &out) == 2);
}

TEST_SUITE_END();
