#include "hrme/experts.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "hrme/rng.hpp"

namespace hrme::experts {

const char* to_string(ClassifierKind k) {
  return k == ClassifierKind::linear_logistic ? "linear_logistic" : "rbf_logistic";
}

const char* to_string(RegressorKind k) {
  return k == RegressorKind::linear_ridge ? "linear_ridge" : "rbf_krr";
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
  if (s == "linear_logistic") return ClassifierKind::linear_logistic;
  if (s == "rbf_logistic") return ClassifierKind::rbf_logistic;
  throw SchemaError("unknown classifier kind '" + s + "'");
}

RegressorKind regressor_kind_from_string(const std::string& s) {
  if (s == "linear_ridge") return RegressorKind::linear_ridge;
  if (s == "rbf_krr") return RegressorKind::rbf_krr;
  throw SchemaError("unknown regressor kind '" + s + "'");
}

BinaryLabels make_labels(const numeric::Vector& y, double t) {
  BinaryLabels labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) labels[i] = y[i] >= t ? 1 : 0;
  return labels;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

// ---------------------------------------------------------------- classifier

double ClassifierExpert::decision_value(std::span<const double> x) const {
  if (x.size() != feature_dim()) {
    throw DimensionMismatch("classifier expects " + std::to_string(feature_dim()) +
                            " features, got " + std::to_string(x.size()));
  }
  double v = bias;
  if (kind == ClassifierKind::linear_logistic) {
    for (std::size_t j = 0; j < weights.size(); ++j) v += weights[j] * x[j];
  } else {
    for (std::size_t j = 0; j < anchors.rows(); ++j) {
      v += weights[j] * std::exp(-gamma * numeric::squared_distance(x, anchors.row(j)));
    }
  }
  return v;
}

double ClassifierExpert::proba_right(std::span<const double> x) const {
  return sigmoid(decision_value(x));
}

double ClassifierExpert::log_proba_right(std::span<const double> x) const {
  return -softplus(-decision_value(x));
}

double ClassifierExpert::log_proba_left(std::span<const double> x) const {
  return -softplus(decision_value(x));
}

double predict_proba(const ClassifierExpert& c, std::span<const double> x) {
  return c.proba_right(x);
}

double predict_proba_left(const ClassifierExpert& c, std::span<const double> x) {
  return 1.0 - c.proba_right(x);
}

double LogisticObjective::loss(const numeric::Vector& params) const {
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  const double bias = params[p];
  double nll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = design.row(i);
    double z = bias;
    for (std::size_t j = 0; j < p; ++j) z += params[j] * row[j];
    nll += softplus(z) - (labels[i] != 0 ? z : 0.0);
  }
  double penalty = 0.0;
  for (std::size_t j = 0; j < p; ++j) penalty += params[j] * params[j];
  return nll + l2_lambda * penalty;
}

numeric::Vector LogisticObjective::gradient(const numeric::Vector& params) const {
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  const double bias = params[p];
  numeric::Vector g(p + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = design.row(i);
    double z = bias;
    for (std::size_t j = 0; j < p; ++j) z += params[j] * row[j];
    const double r = sigmoid(z) - static_cast<double>(labels[i]);
    for (std::size_t j = 0; j < p; ++j) g[j] += r * row[j];
    g[p] += r;
  }
  for (std::size_t j = 0; j < p; ++j) g[j] += 2.0 * l2_lambda * params[j];
  return g;
}

namespace {

double inf_norm(const numeric::Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(const numeric::Vector& a, const numeric::Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct MinimizeResult {
  numeric::Vector params;
  bool converged = false;
};

// L-BFGS (history 10, two-loop recursion) with Armijo backtracking, so the
// objective value never increases between iterates.
MinimizeResult minimize(const LogisticObjective& obj, numeric::Vector x, double tol,
                        std::size_t max_iters) {
  constexpr std::size_t kHistory = 10;
  constexpr double kArmijo = 1e-4;

  std::deque<numeric::Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  double f = obj.loss(x);
  numeric::Vector g = obj.gradient(x);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    if (inf_norm(g) <= tol) return {std::move(x), true};

    // Two-loop recursion for d = -H g.
    numeric::Vector d = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t j = 0; j < d.size(); ++j) d[j] -= alpha[k] * y_hist[k][j];
    }
    if (!s_hist.empty()) {
      const double gamma =
          dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += (alpha[k] - beta) * s_hist[k][j];
    }
    for (double& v : d) v = -v;

    double slope = dot(g, d);
    if (!(slope < 0.0)) {  // fall back to steepest descent
      for (std::size_t j = 0; j < d.size(); ++j) d[j] = -g[j];
      slope = dot(g, d);
      if (!(slope < 0.0)) return {std::move(x), inf_norm(g) <= tol};
    }

    double step = 1.0;
    numeric::Vector x_new(x.size());
    double f_new = f;
    for (;;) {
      for (std::size_t j = 0; j < x.size(); ++j) x_new[j] = x[j] + step * d[j];
      f_new = obj.loss(x_new);
      if (f_new <= f + kArmijo * step * slope) break;
      step *= 0.5;
      if (step < 1e-20) return {std::move(x), inf_norm(g) <= tol};  // stalled
    }

    numeric::Vector g_new = obj.gradient(x_new);
    numeric::Vector s(x.size()), yv(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      s[j] = x_new[j] - x[j];
      yv[j] = g_new[j] - g[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12) {  // keep the inverse-Hessian estimate positive definite
      if (s_hist.size() == kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
  }
  return {std::move(x), inf_norm(g) <= tol};
}

}  // namespace

ClassifierExpert fit_classifier(const numeric::Matrix& x, const BinaryLabels& labels,
                                const ClassifierConfig& cfg, std::uint64_t anchor_seed) {
  if (x.rows() != labels.size()) {
    throw DimensionMismatch("fit_classifier: rows vs labels length");
  }
  bool has0 = false, has1 = false;
  for (int l : labels) (l != 0 ? has1 : has0) = true;
  if (!has0 || !has1) {
    throw SingleClassError("fit_classifier: both classes must be present");
  }

  ClassifierExpert expert;
  expert.kind = cfg.kind;
  expert.l2_lambda = cfg.l2_lambda;

  const numeric::Matrix* design = &x;
  numeric::Matrix kernel_design;
  if (cfg.kind == ClassifierKind::rbf_logistic) {
    expert.gamma = cfg.gamma;
    if (x.rows() > cfg.max_anchors) {
      Rng rng(anchor_seed);
      const auto picked = rng.sample_indices(x.rows(), cfg.max_anchors);
      expert.anchors = x.gather_rows(picked);
    } else {
      expert.anchors = x;
    }
    kernel_design = numeric::rbf_design(x, expert.anchors, cfg.gamma);
    design = &kernel_design;
  }

  const LogisticObjective obj{*design, labels, cfg.l2_lambda};
  auto result = minimize(obj, numeric::Vector(obj.param_count(), 0.0), cfg.tol,
                         cfg.max_iters);
  expert.bias = result.params.back();
  result.params.pop_back();
  expert.weights = std::move(result.params);
  expert.converged = result.converged;
  return expert;
}

// ---------------------------------------------------------------- regressor

double RegressorExpert::predict(std::span<const double> x) const {
  if (x.size() != feature_dim()) {
    throw DimensionMismatch("regressor expects " + std::to_string(feature_dim()) +
                            " features, got " + std::to_string(x.size()));
  }
  if (kind == RegressorKind::linear_ridge) {
    double v = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) v += weights[j] * x[j];
    return v;
  }
  double v = 0.0;
  for (std::size_t j = 0; j < anchors.rows(); ++j) {
    v += weights[j] * std::exp(-gamma * numeric::squared_distance(x, anchors.row(j)));
  }
  return v;
}

double RegressorExpert::log_density(std::span<const double> x, double y) const {
  constexpr double kLogTwoPi = 1.8378770664093454836;
  const double r = (y - predict(x)) / sigma;
  return -0.5 * kLogTwoPi - std::log(sigma) - 0.5 * r * r;
}

RegressorExpert fit_regressor(const numeric::Matrix& x, const numeric::Vector& y,
                              const RegressorConfig& cfg) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n != y.size()) throw DimensionMismatch("fit_regressor: rows vs targets length");
  if (n == 0) throw FitError("fit_regressor: no samples");

  RegressorExpert expert;
  if (n == 1) {  // degenerate leaf: constant predictor at the lone target
    expert.kind = RegressorKind::linear_ridge;
    expert.weights.assign(d, 0.0);
    expert.bias = y[0];
    expert.sigma = 1e-9;
    return expert;
  }

  try {
    if (cfg.kind == RegressorKind::linear_ridge) {
      // Normal equations over [X, 1]; only the weight block is penalized.
      numeric::Matrix m(d + 1, d + 1);
      numeric::Vector rhs(d + 1, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        for (std::size_t a = 0; a < d; ++a) {
          for (std::size_t b = a; b < d; ++b) m(a, b) += row[a] * row[b];
          m(a, d) += row[a];
          rhs[a] += row[a] * y[i];
        }
        rhs[d] += y[i];
      }
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a + 1; b < d; ++b) m(b, a) = m(a, b);
        m(d, a) = m(a, d);
        m(a, a) += cfg.lambda;
      }
      m(d, d) = static_cast<double>(n);

      numeric::Vector sol = numeric::cholesky_solve(m, rhs);
      expert.kind = RegressorKind::linear_ridge;
      expert.bias = sol.back();
      sol.pop_back();
      expert.weights = std::move(sol);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - expert.predict(x.row(i));
        ss += r * r;
      }
      expert.sigma = std::max(std::sqrt(ss / static_cast<double>(n)), 1e-9);
    } else {
      numeric::Matrix k = numeric::gram_matrix(x, cfg.gamma);
      for (std::size_t i = 0; i < n; ++i) k(i, i) += cfg.lambda;
      expert.kind = RegressorKind::rbf_krr;
      expert.gamma = cfg.gamma;
      expert.weights = numeric::cholesky_solve(k, y);
      expert.anchors = x;
      // Training predictions through the already-built regularized gram:
      // K alpha = (K + lambda I) alpha - lambda alpha.
      double ss = 0.0;
      const double* kd = k.data().data();
      for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        const double* rowi = kd + i * n;
        for (std::size_t j = 0; j < n; ++j) fit += rowi[j] * expert.weights[j];
        fit -= cfg.lambda * expert.weights[i];
        const double r = y[i] - fit;
        ss += r * r;
      }
      expert.sigma = std::max(std::sqrt(ss / static_cast<double>(n)), 1e-9);
    }
  } catch (const NotPositiveDefinite& e) {
    throw FitError(std::string("fit_regressor: ") + e.what() +
                   " (raise the leaf lambda)");
  }
  return expert;
}

double predict_leaf(const RegressorExpert& r, std::span<const double> x) {
  return r.predict(x);
}

double leaf_log_density(const RegressorExpert& r, std::span<const double> x, double y) {
  return r.log_density(x, y);
}

}  // namespace hrme::experts
