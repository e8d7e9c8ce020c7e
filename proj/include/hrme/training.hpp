#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrme/tree.hpp"

namespace hrme::training {

struct TrainConfig {
  std::size_t grid_points = 16;
  double min_leaf_sample_ratio = 0.02;
  std::size_t max_depth = 8;
  double q_improve_eps = 1e-6;
  experts::ClassifierConfig classifier;
  experts::RegressorConfig leaf;
  std::uint64_t seed = 0;
  bool standardize = true;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
// Strict: unknown keys raise ConfigError naming the offending key.
TrainConfig train_config_from_json(const nlohmann::json& j,
                                   const std::string& key_prefix = "train");

// Rows of the training set owned by one node during growth. Children's
// row sets partition the parent's.
struct NodeData {
  std::vector<std::size_t> rows;
  std::size_t size() const { return rows.size(); }
};

// Interior quantiles of y at levels k / (grid_points + 1), k = 1..grid,
// by sorted linear interpolation (h = (n - 1) * level), deduplicated and
// kept strictly inside (min y, max y). Fewer than two distinct values
// yield an empty grid.
std::vector<double> candidate_thresholds(const numeric::Vector& y_node,
                                         std::size_t grid_points);

// Hard split on the target: left rows have y < t, right rows y >= t.
std::pair<NodeData, NodeData> split_data(const NodeData& data, const numeric::Vector& y,
                                         double t);

// Growth objective: negative mean squared error of the soft-routed tree
// over the full training set.
double compute_q(const tree::HrmeModel& model, const dataset::Dataset& train);

// Evidence lower bound diagnostic with the empirical leaf frequencies
// standing in for the true assignment mass. Routing masses are floored at
// 1e-300 before logs.
double compute_elbo(const tree::HrmeModel& model, const dataset::Dataset& train);

struct SplitProposal {
  double t = 0.0;
  experts::ClassifierExpert classifier;
  experts::RegressorExpert left_leaf;
  experts::RegressorExpert right_leaf;
  NodeData left_rows;
  NodeData right_rows;
  double q = 0.0;  // global Q with this split in place of the leaf
};

struct SplitSearch {
  std::vector<double> candidates;     // thresholds that passed the ratio gate
  std::optional<SplitProposal> best;  // empty: no candidate could be evaluated
};

// Grid-searches thresholds for the leaf at node_path: gates each candidate
// on min_leaf_sample_ratio, fits the node classifier and both child leaves,
// scores the whole tree by compute_q, and returns the argmax. Candidates
// are scored in ascending threshold order; exact ties keep the earlier one.
// Evaluation may fan out over threads (HRME_THREADS) but the selection is
// independent of scheduling.
SplitSearch try_split(const tree::HrmeModel& model, std::string_view node_path,
                      const NodeData& data, const dataset::Dataset& train,
                      const TrainConfig& cfg);

struct GrowthStep {
  std::string node_path;  // "" for the root, then 'L'/'R' per level
  std::vector<double> candidates;
  std::optional<double> chosen_t;
  bool accepted = false;
  double q_before = 0.0;
  std::optional<double> q_after;
  std::optional<double> rmse_after;
  std::string reason;  // "accepted" | "no_improvement" | "no_valid_candidate"
};

struct GrowthTrace {
  std::vector<GrowthStep> steps;
  nlohmann::json to_json() const;
};

struct TrainResult {
  tree::HrmeModel model;
  GrowthTrace trace;
};

// Recursive depth-first growth: the model starts as one fitted leaf, and
// every leaf is offered a split via try_split; a split is kept only when
// it raises the global Q by more than q_improve_eps, otherwise the trial
// subtree is discarded. Fully deterministic for a fixed seed and config.
TrainResult grow_tree(const dataset::Dataset& train, const TrainConfig& cfg);

// Worker count for candidate evaluation: HRME_THREADS when set and > 0,
// otherwise the hardware concurrency, clamped to the candidate count.
std::size_t candidate_thread_count(std::size_t candidates);

}  // namespace hrme::training
