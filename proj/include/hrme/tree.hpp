#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hrme/dataset.hpp"
#include "hrme/experts.hpp"

namespace hrme::tree {

// Binary tree node: a leaf carries a regressor, an internal node carries a
// classifier plus the target threshold that defined its classes. Internal
// nodes always have both children.
struct TreeNode {
  std::unique_ptr<TreeNode> left;
  std::unique_ptr<TreeNode> right;
  std::optional<experts::ClassifierExpert> classifier;
  double threshold_t = 0.0;
  // Training RMSE recorded when the split was accepted; NaN if unknown.
  double train_rmse = std::numeric_limits<double>::quiet_NaN();

  std::optional<experts::RegressorExpert> regressor;
  std::size_t train_count = 0;

  bool is_leaf() const { return left == nullptr; }

  static TreeNode leaf(experts::RegressorExpert regressor, std::size_t train_count);
  static TreeNode internal(experts::ClassifierExpert classifier, double threshold,
                           TreeNode left_child, TreeNode right_child);

  TreeNode clone() const;
};

// Navigates from a node along a path of 'L'/'R' characters.
TreeNode* node_at(TreeNode& root, std::string_view path);
const TreeNode* node_at(const TreeNode& root, std::string_view path);

// Per-leaf routing masses for one input, indexed by leaf id. Leaf ids run
// in depth-first order (top to bottom, left to right) and match leaves().
struct LeafPosterior {
  std::vector<double> q;
};

// One leaf's share of a prediction: the leaf node and its routing mass.
struct LeafTerm {
  const TreeNode* leaf;
  double q;
};

// Walks the tree for a pre-standardized input, appending (leaf, q) in
// depth-first leaf order. Branch probabilities accumulate in log space and
// are normalized at the end, so deep trees cannot underflow.
void leaf_terms(const TreeNode& root, std::span<const double> x_std,
                std::vector<LeafTerm>& out);

struct ModelMeta {
  std::uint64_t seed = 0;
  std::string config_json;          // training config snapshot, JSON text
  std::vector<double> rmse_trace;   // training RMSE after each accepted split
};

class HrmeModel {
 public:
  HrmeModel(TreeNode root, dataset::Standardizer standardizer, std::size_t feature_dim,
            ModelMeta meta = {});

  std::size_t feature_dim() const { return feature_dim_; }
  const dataset::Standardizer& standardizer() const { return standardizer_; }
  const TreeNode& root() const { return root_; }
  TreeNode& root() { return root_; }
  const ModelMeta& meta() const { return meta_; }
  ModelMeta& meta() { return meta_; }

  // Leaves in depth-first order; index is the leaf id used everywhere.
  std::vector<const TreeNode*> leaves() const;
  std::size_t leaf_count() const;
  std::size_t depth() const;

  // All take raw (unstandardized) feature vectors.
  LeafPosterior leaf_posteriors(std::span<const double> x) const;
  double predict_mean(std::span<const double> x) const;
  // Highest-posterior leaf's prediction; ties go to the smaller leaf id.
  std::pair<double, std::size_t> predict_top1(std::span<const double> x) const;
  // log sum_l q(l|x) N(y; r_l(x), sigma_l^2), evaluated by log-sum-exp.
  double log_marginal_density(std::span<const double> x, double y) const;

  // Pre-standardized fast paths used by training and by the walkers above.
  void leaf_terms_std(std::span<const double> x_std, std::vector<LeafTerm>& out) const;
  double predict_mean_std(std::span<const double> x_std) const;

 private:
  numeric::Vector standardize(std::span<const double> x) const;

  TreeNode root_;
  dataset::Standardizer standardizer_;
  std::size_t feature_dim_ = 0;
  ModelMeta meta_;
};

// Versioned JSON model files. Reals keep full precision, so a load(save())
// round trip predicts bit-identically. Unknown schema versions raise
// SchemaError.
nlohmann::json model_to_json(const HrmeModel& m);
std::string model_to_json_string(const HrmeModel& m);
HrmeModel model_from_json(const nlohmann::json& j);
void save_model(const HrmeModel& m, const std::filesystem::path& path);
HrmeModel load_model(const std::filesystem::path& path);

// Depth-first renderings of the tree: thresholds and accepted-step RMSE on
// internal nodes, sample counts on leaves.
std::string dump_tree_text(const HrmeModel& m);
nlohmann::json dump_tree_json(const HrmeModel& m);

}  // namespace hrme::tree
