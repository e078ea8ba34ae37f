#pragma once

#include "rfx/mdp.hpp"
#include "rfx/pipeline.hpp"
#include "rfx/trainer.hpp"

#include <string>
#include <vector>

namespace rfx {

// Per-iteration training metrics as CSV. Skipped Monte-Carlo estimates are
// written as nan.
void write_metrics_csv(const std::string& path, const std::vector<IterationMetrics>& rows);

// Training state (policy logits, value table, visit counts) as JSON.
void save_checkpoint(const std::string& path, const TabularPolicy& policy,
                     const TabularValueFn& value, const Eigen::MatrixXd& counts);
struct Checkpoint {
  TabularPolicy policy;
  TabularValueFn value;
  Eigen::MatrixXd counts;
};
Checkpoint load_checkpoint(const std::string& path);

// Transition datasets as JSON lines: one metadata header object, then one
// object per record with h = null for discounted data.
void save_dataset(const std::string& path, const TransitionDataset& dataset);
TransitionDataset load_dataset(const std::string& path);

// Reward tables as a single JSON document, stationary or per-step.
void save_reward(const std::string& path, const RewardFn& reward);
RewardFn load_reward(const std::string& path);

// Policies as JSON logits, stationary or per-step.
void save_policy(const std::string& path, const TabularPolicy& policy);
void save_policy(const std::string& path, const NonStationaryPolicy& policy);
bool policy_file_is_episodic(const std::string& path);
TabularPolicy load_stationary_policy(const std::string& path);
NonStationaryPolicy load_episodic_policy(const std::string& path);

// Planner evaluation summary, one row per reward.
struct EvaluationRow {
  std::string reward_id;
  double j_planned = 0.0;
  double j_optimal = 0.0;
  double gap = 0.0;
};
void write_evaluation_csv(const std::string& path, const std::vector<EvaluationRow>& rows);

// Run manifest: configuration (verbatim + FNV-1a hash), toolchain versions,
// and wall-clock bookkeeping.
void write_manifest(const std::string& path, const std::string& config_json,
                    double elapsed_seconds);

}  // namespace rfx
