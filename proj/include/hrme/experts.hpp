#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hrme/numeric.hpp"

namespace hrme::experts {

enum class ClassifierKind { linear_logistic, rbf_logistic };
enum class RegressorKind { linear_ridge, rbf_krr };

const char* to_string(ClassifierKind k);
const char* to_string(RegressorKind k);
ClassifierKind classifier_kind_from_string(const std::string& s);
RegressorKind regressor_kind_from_string(const std::string& s);

// Thresholded class labels: 1 iff y >= t.
using BinaryLabels = std::vector<int>;
BinaryLabels make_labels(const numeric::Vector& y, double t);

double sigmoid(double v);
// log(1 + exp(v)) without overflow.
double softplus(double v);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::rbf_logistic;
  double l2_lambda = 1e-3;
  double gamma = 1.0;             // rbf_logistic only
  std::size_t max_anchors = 512;  // rbf_logistic only
  double tol = 1e-6;
  std::size_t max_iters = 500;
};

// A fitted probabilistic binary classifier. The reported probability is
// always the chance of routing to the class-1 (y >= t) side.
struct ClassifierExpert {
  ClassifierKind kind = ClassifierKind::linear_logistic;
  numeric::Vector weights;  // linear: per feature; rbf: per anchor
  double bias = 0.0;
  double gamma = 1.0;       // rbf only
  numeric::Matrix anchors;  // rbf only
  double l2_lambda = 0.0;
  bool converged = true;

  std::size_t feature_dim() const {
    return kind == ClassifierKind::linear_logistic ? weights.size() : anchors.cols();
  }
  double decision_value(std::span<const double> x) const;
  double proba_right(std::span<const double> x) const;
  // log P(right) and log P(left), computed stably from the decision value.
  double log_proba_right(std::span<const double> x) const;
  double log_proba_left(std::span<const double> x) const;
};

double predict_proba(const ClassifierExpert& c, std::span<const double> x);
double predict_proba_left(const ClassifierExpert& c, std::span<const double> x);

// Penalized logistic negative log-likelihood on a fixed design matrix.
// Parameter layout: [weights (one per design column), bias]; the bias is
// unpenalized. Kept public so tests can difference the loss directly
// against the analytic gradient.
struct LogisticObjective {
  const numeric::Matrix& design;  // n x p
  const BinaryLabels& labels;     // n entries in {0, 1}
  double l2_lambda = 0.0;

  std::size_t param_count() const { return design.cols() + 1; }
  double loss(const numeric::Vector& params) const;
  numeric::Vector gradient(const numeric::Vector& params) const;
};

// Fits by quasi-Newton descent (L-BFGS with Armijo backtracking) from a
// zero start until the gradient infinity norm reaches cfg.tol or
// cfg.max_iters is hit; the best iterate is returned either way with
// `converged` recording which. For rbf_logistic, anchors are the node's
// rows, or a seeded uniform subsample of max_anchors of them.
// Throws SingleClassError unless both classes are present.
ClassifierExpert fit_classifier(const numeric::Matrix& x, const BinaryLabels& labels,
                                const ClassifierConfig& cfg, std::uint64_t anchor_seed = 0);

struct RegressorConfig {
  RegressorKind kind = RegressorKind::rbf_krr;
  double lambda = 1e-2;
  double gamma = 1.0;  // rbf_krr only

  static RegressorConfig ridge(double lambda = 1e-3) {
    return {RegressorKind::linear_ridge, lambda, 1.0};
  }
  static RegressorConfig krr(double lambda = 1e-2, double gamma = 1.0) {
    return {RegressorKind::rbf_krr, lambda, gamma};
  }
};

// A fitted leaf regressor with the residual scale used for densities.
struct RegressorExpert {
  RegressorKind kind = RegressorKind::linear_ridge;
  numeric::Vector weights;  // ridge: per feature; krr: per anchor
  double bias = 0.0;        // ridge only
  double gamma = 1.0;       // krr only
  numeric::Matrix anchors;  // krr only
  double sigma = 1e-9;

  std::size_t feature_dim() const {
    return kind == RegressorKind::linear_ridge ? weights.size() : anchors.cols();
  }
  double predict(std::span<const double> x) const;
  // log N(y; predict(x), sigma^2)
  double log_density(std::span<const double> x, double y) const;
};

// linear_ridge: (X^T X + lambda I) w = X^T y with an appended, unpenalized
// bias column. rbf_krr: (K + lambda I) alpha = y over the sample rows.
// sigma = max(rms residual, 1e-9). A single sample yields the constant
// predictor equal to its target. NotPositiveDefinite from the solver
// surfaces as FitError advising a larger lambda.
RegressorExpert fit_regressor(const numeric::Matrix& x, const numeric::Vector& y,
                              const RegressorConfig& cfg);

double predict_leaf(const RegressorExpert& r, std::span<const double> x);
double leaf_log_density(const RegressorExpert& r, std::span<const double> x, double y);

}  // namespace hrme::experts
