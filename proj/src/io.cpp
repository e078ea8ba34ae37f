#include "rfx/io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace rfx {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return in;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty())
    throw std::runtime_error("expected a non-empty array of rows");
  Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  Eigen::Index n_cols = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != n_cols)
      throw std::runtime_error("ragged matrix rows");
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

json load_json(const std::string& path) {
  std::ifstream in = open_in(path);
  json doc;
  in >> doc;
  return doc;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<IterationMetrics>& rows) {
  std::ofstream out = open_out(path);
  out << "iter,exact_entropy,mc_entropy,mean_traj_len,policy_kl,value_loss\n";
  out << std::setprecision(12);
  for (const IterationMetrics& m : rows) {
    out << m.iter << ',' << m.exact_entropy << ',';
    if (std::isnan(m.mc_entropy))
      out << "nan";
    else
      out << m.mc_entropy;
    out << ',' << m.mean_traj_len << ',' << m.policy_kl << ',' << m.value_loss << '\n';
  }
}

void save_checkpoint(const std::string& path, const TabularPolicy& policy,
                     const TabularValueFn& value, const Eigen::MatrixXd& counts) {
  json doc;
  doc["policy_logits"] = matrix_to_json(policy.logits);
  json v = json::array();
  for (Eigen::Index i = 0; i < value.v.size(); ++i) v.push_back(value.v[i]);
  doc["value"] = std::move(v);
  doc["counts"] = matrix_to_json(counts);
  open_out(path) << doc.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  json doc = load_json(path);
  Checkpoint ck;
  ck.policy.logits = matrix_from_json(doc.at("policy_logits"));
  const json& v = doc.at("value");
  ck.value.v = Eigen::VectorXd(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) ck.value.v[i] = v[i].get<double>();
  ck.counts = matrix_from_json(doc.at("counts"));
  return ck;
}

void save_dataset(const std::string& path, const TransitionDataset& dataset) {
  std::ofstream out = open_out(path);
  json meta;
  meta["n_states"] = dataset.n_states;
  meta["n_actions"] = dataset.n_actions;
  meta["horizon"] = dataset.horizon;
  meta["gamma"] = dataset.gamma;
  meta["source"] = dataset.source;
  meta["n_trajectories"] = dataset.n_trajectories;
  meta["seed"] = dataset.seed;
  meta["selection_counts"] = dataset.selection_counts;
  meta["n_records"] = dataset.records.size();
  out << meta.dump() << '\n';
  for (const TransitionRecord& rec : dataset.records) {
    json row;
    row["s"] = rec.s;
    row["a"] = rec.a;
    row["s2"] = rec.s2;
    if (rec.h >= 1)
      row["h"] = rec.h;
    else
      row["h"] = nullptr;
    out << row.dump() << '\n';
  }
}

TransitionDataset load_dataset(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
  json meta = json::parse(line);
  TransitionDataset ds;
  ds.n_states = meta.at("n_states").get<int>();
  ds.n_actions = meta.at("n_actions").get<int>();
  ds.horizon = meta.at("horizon").get<int>();
  ds.gamma = meta.at("gamma").get<double>();
  ds.source = meta.at("source").get<std::string>();
  ds.n_trajectories = meta.at("n_trajectories").get<long>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.selection_counts = meta.value("selection_counts", std::vector<long>{});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    TransitionRecord rec;
    rec.s = row.at("s").get<int>();
    rec.a = row.at("a").get<int>();
    rec.s2 = row.at("s2").get<int>();
    rec.h = row.at("h").is_null() ? -1 : row.at("h").get<int>();
    ds.records.push_back(rec);
  }
  return ds;
}

void save_reward(const std::string& path, const RewardFn& reward) {
  json doc;
  doc["kind"] = reward.is_stationary() ? "stationary" : "per-step";
  if (reward.is_stationary()) {
    doc["table"] = matrix_to_json(reward.table[0]);
  } else {
    json steps = json::array();
    for (const Eigen::MatrixXd& t : reward.table) steps.push_back(matrix_to_json(t));
    doc["table"] = std::move(steps);
  }
  open_out(path) << doc.dump(2) << '\n';
}

RewardFn load_reward(const std::string& path) {
  json doc = load_json(path);
  std::string kind = doc.at("kind").get<std::string>();
  if (kind == "stationary") return RewardFn::stationary(matrix_from_json(doc.at("table")));
  if (kind != "per-step") throw std::runtime_error("unknown reward kind: " + kind);
  std::vector<Eigen::MatrixXd> tables;
  for (const json& step : doc.at("table")) tables.push_back(matrix_from_json(step));
  return RewardFn::per_step(std::move(tables));
}

void save_policy(const std::string& path, const TabularPolicy& policy) {
  json doc;
  doc["kind"] = "stationary";
  doc["logits"] = matrix_to_json(policy.logits);
  open_out(path) << doc.dump(2) << '\n';
}

void save_policy(const std::string& path, const NonStationaryPolicy& policy) {
  json doc;
  doc["kind"] = "per-step";
  json steps = json::array();
  for (const Eigen::MatrixXd& l : policy.logits) steps.push_back(matrix_to_json(l));
  doc["logits"] = std::move(steps);
  open_out(path) << doc.dump(2) << '\n';
}

bool policy_file_is_episodic(const std::string& path) {
  return load_json(path).at("kind").get<std::string>() == "per-step";
}

TabularPolicy load_stationary_policy(const std::string& path) {
  json doc = load_json(path);
  if (doc.at("kind").get<std::string>() != "stationary")
    throw std::runtime_error("expected a stationary policy in " + path);
  TabularPolicy p;
  p.logits = matrix_from_json(doc.at("logits"));
  return p;
}

NonStationaryPolicy load_episodic_policy(const std::string& path) {
  json doc = load_json(path);
  if (doc.at("kind").get<std::string>() != "per-step")
    throw std::runtime_error("expected a per-step policy in " + path);
  NonStationaryPolicy p;
  for (const json& step : doc.at("logits")) p.logits.push_back(matrix_from_json(step));
  return p;
}

void write_evaluation_csv(const std::string& path,
                          const std::vector<EvaluationRow>& rows) {
  std::ofstream out = open_out(path);
  out << "reward_id,j_planned,j_optimal,gap\n";
  out << std::setprecision(12);
  for (const EvaluationRow& r : rows)
    out << r.reward_id << ',' << r.j_planned << ',' << r.j_optimal << ',' << r.gap
        << '\n';
}

void write_manifest(const std::string& path, const std::string& config_json,
                    double elapsed_seconds) {
  json doc;
  doc["config"] = json::parse(config_json);
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config_json);
  doc["config_hash"] = hash.str();
  json versions;
  versions["compiler"] = __VERSION__;
  versions["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  versions["cxx_standard"] = static_cast<long>(__cplusplus);
  doc["versions"] = std::move(versions);
  std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  doc["finished_at"] = stamp;
  doc["elapsed_seconds"] = elapsed_seconds;
  open_out(path) << doc.dump(2) << '\n';
}

}  // namespace rfx
