#include "hrme/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace hrme::tree {

using nlohmann::json;

TreeNode TreeNode::leaf(experts::RegressorExpert regressor, std::size_t train_count) {
  TreeNode node;
  node.regressor = std::move(regressor);
  node.train_count = train_count;
  return node;
}

TreeNode TreeNode::internal(experts::ClassifierExpert classifier, double threshold,
                            TreeNode left_child, TreeNode right_child) {
  TreeNode node;
  node.classifier = std::move(classifier);
  node.threshold_t = threshold;
  node.left = std::make_unique<TreeNode>(std::move(left_child));
  node.right = std::make_unique<TreeNode>(std::move(right_child));
  return node;
}

TreeNode TreeNode::clone() const {
  TreeNode out;
  out.classifier = classifier;
  out.threshold_t = threshold_t;
  out.train_rmse = train_rmse;
  out.regressor = regressor;
  out.train_count = train_count;
  if (left) out.left = std::make_unique<TreeNode>(left->clone());
  if (right) out.right = std::make_unique<TreeNode>(right->clone());
  return out;
}

TreeNode* node_at(TreeNode& root, std::string_view path) {
  TreeNode* node = &root;
  for (char c : path) {
    if (node->is_leaf()) return nullptr;
    if (c == 'L') {
      node = node->left.get();
    } else if (c == 'R') {
      node = node->right.get();
    } else {
      return nullptr;
    }
  }
  return node;
}

const TreeNode* node_at(const TreeNode& root, std::string_view path) {
  return node_at(const_cast<TreeNode&>(root), path);
}

namespace {

void collect_log_terms(const TreeNode& node, std::span<const double> x_std, double log_q,
                       std::vector<LeafTerm>& out) {
  if (node.is_leaf()) {
    out.push_back({&node, log_q});
    return;
  }
  const double v = node.classifier->decision_value(x_std);
  // log sigmoid(v) and log sigmoid(-v), stable at any magnitude.
  collect_log_terms(*node.left, x_std, log_q - experts::softplus(v), out);
  collect_log_terms(*node.right, x_std, log_q - experts::softplus(-v), out);
}

}  // namespace

void leaf_terms(const TreeNode& root, std::span<const double> x_std,
                std::vector<LeafTerm>& out) {
  out.clear();
  collect_log_terms(root, x_std, 0.0, out);
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& term : out) max_log = std::max(max_log, term.q);
  double z = 0.0;
  for (auto& term : out) {
    term.q = std::exp(term.q - max_log);
    z += term.q;
  }
  for (auto& term : out) term.q /= z;
}

HrmeModel::HrmeModel(TreeNode root, dataset::Standardizer standardizer,
                     std::size_t feature_dim, ModelMeta meta)
    : root_(std::move(root)),
      standardizer_(std::move(standardizer)),
      feature_dim_(feature_dim),
      meta_(std::move(meta)) {
  if (standardizer_.dim() != feature_dim_) {
    throw DimensionMismatch("model standardizer dimension != feature_dim");
  }
}

namespace {

void collect_leaves(const TreeNode& node, std::vector<const TreeNode*>& out) {
  if (node.is_leaf()) {
    out.push_back(&node);
    return;
  }
  collect_leaves(*node.left, out);
  collect_leaves(*node.right, out);
}

std::size_t node_depth(const TreeNode& node) {
  if (node.is_leaf()) return 0;
  return 1 + std::max(node_depth(*node.left), node_depth(*node.right));
}

}  // namespace

std::vector<const TreeNode*> HrmeModel::leaves() const {
  std::vector<const TreeNode*> out;
  collect_leaves(root_, out);
  return out;
}

std::size_t HrmeModel::leaf_count() const { return leaves().size(); }

std::size_t HrmeModel::depth() const { return node_depth(root_); }

numeric::Vector HrmeModel::standardize(std::span<const double> x) const {
  if (x.size() != feature_dim_) {
    throw DimensionMismatch("model expects " + std::to_string(feature_dim_) +
                            " features, got " + std::to_string(x.size()));
  }
  return standardizer_.apply_row(x);
}

void HrmeModel::leaf_terms_std(std::span<const double> x_std,
                               std::vector<LeafTerm>& out) const {
  leaf_terms(root_, x_std, out);
}

double HrmeModel::predict_mean_std(std::span<const double> x_std) const {
  std::vector<LeafTerm> terms;
  leaf_terms(root_, x_std, terms);
  double acc = 0.0;
  for (const auto& term : terms) acc += term.q * term.leaf->regressor->predict(x_std);
  return acc;
}

LeafPosterior HrmeModel::leaf_posteriors(std::span<const double> x) const {
  const numeric::Vector x_std = standardize(x);
  std::vector<LeafTerm> terms;
  leaf_terms(root_, x_std, terms);
  LeafPosterior post;
  post.q.reserve(terms.size());
  for (const auto& term : terms) post.q.push_back(term.q);
  return post;
}

double HrmeModel::predict_mean(std::span<const double> x) const {
  return predict_mean_std(standardize(x));
}

std::pair<double, std::size_t> HrmeModel::predict_top1(std::span<const double> x) const {
  const numeric::Vector x_std = standardize(x);
  std::vector<LeafTerm> terms;
  leaf_terms(root_, x_std, terms);
  std::size_t best = 0;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (terms[i].q > terms[best].q) best = i;
  }
  return {terms[best].leaf->regressor->predict(x_std), best};
}

double HrmeModel::log_marginal_density(std::span<const double> x, double y) const {
  const numeric::Vector x_std = standardize(x);
  std::vector<LeafTerm> terms;
  leaf_terms(root_, x_std, terms);
  double max_log = -std::numeric_limits<double>::infinity();
  numeric::Vector logs(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& term = terms[i];
    logs[i] = term.q > 0.0
                  ? std::log(term.q) + term.leaf->regressor->log_density(x_std, y)
                  : -std::numeric_limits<double>::infinity();
    max_log = std::max(max_log, logs[i]);
  }
  double acc = 0.0;
  for (double lv : logs) acc += std::exp(lv - max_log);
  return max_log + std::log(acc);
}

// ------------------------------------------------------------- serialization

namespace {

json classifier_to_json(const experts::ClassifierExpert& c) {
  json j;
  j["kind"] = experts::to_string(c.kind);
  j["weights"] = c.weights;
  j["bias"] = c.bias;
  j["l2_lambda"] = c.l2_lambda;
  j["converged"] = c.converged;
  if (c.kind == experts::ClassifierKind::rbf_logistic) {
    j["gamma"] = c.gamma;
    json anchors = json::array();
    for (std::size_t i = 0; i < c.anchors.rows(); ++i) {
      anchors.push_back(numeric::Vector(c.anchors.row(i).begin(), c.anchors.row(i).end()));
    }
    j["anchors"] = std::move(anchors);
  }
  return j;
}

json regressor_to_json(const experts::RegressorExpert& r) {
  json j;
  j["kind"] = experts::to_string(r.kind);
  j["weights"] = r.weights;
  j["sigma"] = r.sigma;
  if (r.kind == experts::RegressorKind::linear_ridge) {
    j["bias"] = r.bias;
  } else {
    j["gamma"] = r.gamma;
    json anchors = json::array();
    for (std::size_t i = 0; i < r.anchors.rows(); ++i) {
      anchors.push_back(numeric::Vector(r.anchors.row(i).begin(), r.anchors.row(i).end()));
    }
    j["anchors"] = std::move(anchors);
  }
  return j;
}

json node_to_json(const TreeNode& node) {
  json j;
  if (node.is_leaf()) {
    j["kind"] = "leaf";
    j["train_count"] = node.train_count;
    j["regressor"] = regressor_to_json(*node.regressor);
  } else {
    j["kind"] = "internal";
    j["t"] = node.threshold_t;
    if (std::isfinite(node.train_rmse)) j["train_rmse"] = node.train_rmse;
    j["classifier"] = classifier_to_json(*node.classifier);
    j["left"] = node_to_json(*node.left);
    j["right"] = node_to_json(*node.right);
  }
  return j;
}

const json& require(const json& j, const char* key, const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError(std::string("model file: missing '") + key + "' in " + where);
  }
  return *it;
}

numeric::Matrix matrix_from_json(const json& j, const char* where) {
  if (!j.is_array()) throw SchemaError(std::string("model file: ") + where + " not an array");
  std::vector<numeric::Vector> rows;
  rows.reserve(j.size());
  for (const auto& row : j) rows.push_back(row.get<numeric::Vector>());
  return numeric::Matrix::from_rows(rows);
}

experts::ClassifierExpert classifier_from_json(const json& j) {
  experts::ClassifierExpert c;
  c.kind = experts::classifier_kind_from_string(
      require(j, "kind", "classifier").get<std::string>());
  c.weights = require(j, "weights", "classifier").get<numeric::Vector>();
  c.bias = require(j, "bias", "classifier").get<double>();
  c.l2_lambda = j.value("l2_lambda", 0.0);
  c.converged = j.value("converged", true);
  if (c.kind == experts::ClassifierKind::rbf_logistic) {
    c.gamma = require(j, "gamma", "classifier").get<double>();
    c.anchors = matrix_from_json(require(j, "anchors", "classifier"), "anchors");
    if (c.anchors.rows() != c.weights.size()) {
      throw SchemaError("model file: classifier anchors/weights disagree");
    }
  }
  return c;
}

experts::RegressorExpert regressor_from_json(const json& j) {
  experts::RegressorExpert r;
  r.kind = experts::regressor_kind_from_string(
      require(j, "kind", "regressor").get<std::string>());
  r.weights = require(j, "weights", "regressor").get<numeric::Vector>();
  r.sigma = require(j, "sigma", "regressor").get<double>();
  if (r.kind == experts::RegressorKind::linear_ridge) {
    r.bias = require(j, "bias", "regressor").get<double>();
  } else {
    r.gamma = require(j, "gamma", "regressor").get<double>();
    r.anchors = matrix_from_json(require(j, "anchors", "regressor"), "anchors");
    if (r.anchors.rows() != r.weights.size()) {
      throw SchemaError("model file: regressor anchors/weights disagree");
    }
  }
  return r;
}

TreeNode node_from_json(const json& j) {
  const std::string kind = require(j, "kind", "node").get<std::string>();
  if (kind == "leaf") {
    TreeNode node = TreeNode::leaf(regressor_from_json(require(j, "regressor", "leaf")),
                                   j.value("train_count", std::size_t{0}));
    return node;
  }
  if (kind != "internal") throw SchemaError("model file: unknown node kind '" + kind + "'");
  TreeNode node = TreeNode::internal(
      classifier_from_json(require(j, "classifier", "internal node")),
      require(j, "t", "internal node").get<double>(),
      node_from_json(require(j, "left", "internal node")),
      node_from_json(require(j, "right", "internal node")));
  node.train_rmse = j.value("train_rmse", std::numeric_limits<double>::quiet_NaN());
  return node;
}

}  // namespace

json model_to_json(const HrmeModel& m) {
  json j;
  j["schema_version"] = 1;
  j["feature_dim"] = m.feature_dim();
  j["standardizer"] = {{"means", m.standardizer().means},
                       {"stds", m.standardizer().stds}};
  j["root"] = node_to_json(m.root());
  json meta;
  meta["seed"] = m.meta().seed;
  meta["config"] =
      m.meta().config_json.empty() ? json(nullptr) : json::parse(m.meta().config_json);
  meta["rmse_trace"] = m.meta().rmse_trace;
  j["metadata"] = std::move(meta);
  return j;
}

std::string model_to_json_string(const HrmeModel& m) { return model_to_json(m).dump(2); }

HrmeModel model_from_json(const json& j) {
  const auto version = require(j, "schema_version", "top level");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    throw SchemaError("model file: unsupported schema_version " + version.dump());
  }
  const auto feature_dim = require(j, "feature_dim", "top level").get<std::size_t>();
  const json& st = require(j, "standardizer", "top level");
  dataset::Standardizer standardizer{
      require(st, "means", "standardizer").get<numeric::Vector>(),
      require(st, "stds", "standardizer").get<numeric::Vector>()};
  if (standardizer.means.size() != feature_dim ||
      standardizer.stds.size() != feature_dim) {
    throw SchemaError("model file: standardizer dimension != feature_dim");
  }
  TreeNode root = node_from_json(require(j, "root", "top level"));

  ModelMeta meta;
  if (const auto it = j.find("metadata"); it != j.end() && it->is_object()) {
    meta.seed = it->value("seed", std::uint64_t{0});
    if (const auto cfg = it->find("config"); cfg != it->end() && !cfg->is_null()) {
      meta.config_json = cfg->dump();
    }
    meta.rmse_trace = it->value("rmse_trace", std::vector<double>{});
  }
  return HrmeModel(std::move(root), std::move(standardizer), feature_dim, std::move(meta));
}

void save_model(const HrmeModel& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << model_to_json_string(m) << '\n';
  if (!f) throw IoError("write failure on '" + path.string() + "'");
}

HrmeModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw SchemaError("model file '" + path.string() + "': " + e.what());
  }
  return model_from_json(j);
}

// --------------------------------------------------------------------- dump

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void dump_text(const TreeNode& node, std::size_t depth, std::size_t& next_id,
               std::size_t& next_leaf, std::string& out) {
  const std::size_t id = next_id++;
  out.append(2 * depth, ' ');
  if (node.is_leaf()) {
    out += "[" + std::to_string(id) + "] leaf #" + std::to_string(next_leaf++) +
           "  n=" + std::to_string(node.train_count) + "\n";
    return;
  }
  out += "[" + std::to_string(id) + "] split t=" + fmt_g(node.threshold_t);
  if (std::isfinite(node.train_rmse)) out += "  rmse=" + fmt_g(node.train_rmse);
  out += "\n";
  dump_text(*node.left, depth + 1, next_id, next_leaf, out);
  dump_text(*node.right, depth + 1, next_id, next_leaf, out);
}

std::size_t dump_json_nodes(const TreeNode& node, std::size_t depth, std::size_t& next_id,
                            std::size_t& next_leaf, json& nodes) {
  const std::size_t id = next_id++;
  nodes.push_back(json{});
  const std::size_t slot = nodes.size() - 1;
  json& entry = nodes[slot];
  entry["id"] = id;
  entry["depth"] = depth;
  if (node.is_leaf()) {
    entry["kind"] = "leaf";
    entry["leaf_index"] = next_leaf++;
    entry["train_count"] = node.train_count;
    entry["sigma"] = node.regressor ? node.regressor->sigma : 0.0;
    return id;
  }
  entry["kind"] = "internal";
  entry["t"] = node.threshold_t;
  if (std::isfinite(node.train_rmse)) entry["train_rmse"] = node.train_rmse;
  const std::size_t left_id = dump_json_nodes(*node.left, depth + 1, next_id, next_leaf, nodes);
  const std::size_t right_id =
      dump_json_nodes(*node.right, depth + 1, next_id, next_leaf, nodes);
  nodes[slot]["left"] = left_id;
  nodes[slot]["right"] = right_id;
  return id;
}

}  // namespace

std::string dump_tree_text(const HrmeModel& m) {
  std::string out;
  std::size_t next_id = 0, next_leaf = 0;
  dump_text(m.root(), 0, next_id, next_leaf, out);
  return out;
}

json dump_tree_json(const HrmeModel& m) {
  json nodes = json::array();
  std::size_t next_id = 0, next_leaf = 0;
  dump_json_nodes(m.root(), 0, next_id, next_leaf, nodes);
  json j;
  j["nodes"] = std::move(nodes);
  j["leaf_count"] = m.leaf_count();
  j["depth"] = m.depth();
  j["rmse_trace"] = m.meta().rmse_trace;
  return j;
}

}  // namespace hrme::tree
