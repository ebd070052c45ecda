#include "longtmle/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "longtmle/stats.hpp"

namespace longtmle {

LearnerSpec LearnerSpec::logistic() { return LearnerSpec{}; }

LearnerSpec LearnerSpec::ridge(double lambda) {
  LearnerSpec s;
  s.family = LearnerFamily::l2_logistic;
  s.lambda = lambda;
  return s;
}

LearnerSpec LearnerSpec::boosted(GbtParams params) {
  LearnerSpec s;
  s.family = LearnerFamily::gbt;
  s.gbt = params;
  return s;
}

std::string LearnerSpec::display_label() const {
  if (!label.empty()) return label;
  std::ostringstream os;
  switch (family) {
    case LearnerFamily::logistic:
      os << "glm";
      break;
    case LearnerFamily::l2_logistic:
      os << "l2(" << lambda << ")";
      break;
    case LearnerFamily::gbt:
      os << "gbt(trees=" << gbt.n_trees << ",depth=" << gbt.max_depth
         << ",lr=" << gbt.learning_rate << ")";
      break;
  }
  return os.str();
}

double mean_nll(const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                const Eigen::VectorXd& w) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = clamp_prob(p[i], 1e-12);
    num += w[i] * -(y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
    den += w[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

namespace {

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w, const Eigen::VectorXd* offset) {
  if (x.rows() == 0) throw ConfigError("fit_learner: no rows");
  if (y.size() != x.rows() || w.size() != x.rows()) {
    throw ConfigError("fit_learner: y/w length must match x rows");
  }
  if (offset && offset->size() != x.rows()) {
    throw ConfigError("fit_learner: offset length must match x rows");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0) throw ConfigError("fit_learner: negative weight");
    total += w[i];
  }
  if (total <= 0.0) throw ConfigError("fit_learner: zero total weight");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) {
      throw ConfigError("fit_learner: outcomes must lie in [0, 1]");
    }
  }
}

Eigen::VectorXd normalized(const Eigen::VectorXd& w) {
  return w * (static_cast<double>(w.size()) / w.sum());
}

double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                const Eigen::VectorXd& w) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double mu = clamp_prob(expit(eta[i]), 1e-12);
    dev += -2.0 * w[i] * (y[i] * std::log(mu) + (1.0 - y[i]) * std::log(1.0 - mu));
  }
  return dev;
}

struct GlmFit {
  GlmCoefficients coef;
  FitDiagnostics diag;
};

// Iteratively reweighted least squares with ridge penalty on the slopes,
// offset support and step halving when a full update raises the objective.
GlmFit fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const Eigen::VectorXd& w, const Eigen::VectorXd* offset,
               double lambda, const FitOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index d = p + (opts.intercept ? 1 : 0);

  GlmFit out;
  out.coef.has_intercept = opts.intercept;
  out.coef.beta = Eigen::VectorXd::Zero(p);
  if (d == 0) {
    // Nothing to estimate; the margin is identically zero.
    out.diag.converged = true;
    return out;
  }

  Eigen::MatrixXd design(n, d);
  if (opts.intercept) {
    design.col(0).setOnes();
    if (p > 0) design.rightCols(p) = x;
  } else {
    design = x;
  }

  Eigen::VectorXd off = offset ? *offset : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd eta = off;

  // Ridge applies to slopes only; the tiny floor keeps the normal matrix
  // invertible when a column is constant zero (e.g. an unpopulated
  // indicator).
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d, lambda);
  if (opts.intercept) penalty[0] = 0.0;
  const double jitter = 1e-10;

  auto objective = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& e) {
    double pen = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) pen += penalty[j] * b[j] * b[j];
    return deviance(y, e, w) + pen;
  };

  double obj = objective(coef, eta);
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    Eigen::VectorXd mu(n), irls_w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = clamp_prob(expit(eta[i]), 1e-10);
      const double v = m * (1.0 - m);
      mu[i] = m;
      irls_w[i] = w[i] * v;
      z[i] = (eta[i] - off[i]) + (y[i] - m) / v;
    }

    Eigen::MatrixXd xtwx = design.transpose() * irls_w.asDiagonal() * design;
    for (Eigen::Index j = 0; j < d; ++j) xtwx(j, j) += penalty[j] + jitter;
    const Eigen::VectorXd xtwz = design.transpose() * (irls_w.asDiagonal() * z);
    Eigen::VectorXd proposal = xtwx.ldlt().solve(xtwz);

    // Step halving: shrink toward the current iterate until the penalized
    // deviance stops increasing.
    double step = 1.0;
    Eigen::VectorXd cand;
    Eigen::VectorXd cand_eta;
    double cand_obj = 0.0;
    bool accepted = false;
    for (int h = 0; h < 12; ++h) {
      cand = coef + step * (proposal - coef);
      cand_eta = design * cand + off;
      cand_obj = objective(cand, cand_eta);
      if (std::isfinite(cand_obj) && cand_obj <= obj + 1e-12) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const double rel = std::abs(obj - cand_obj) / (std::abs(obj) + 0.1);
    coef = cand;
    eta = cand_eta;
    obj = cand_obj;
    if (rel < opts.tolerance) {
      converged = true;
      ++iter;
      break;
    }
  }

  if (opts.intercept) {
    out.coef.intercept = coef[0];
    if (p > 0) out.coef.beta = coef.tail(p);
  } else {
    out.coef.beta = coef;
  }
  out.diag.iterations = iter;
  out.diag.converged = converged;
  return out;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees.

struct BoostWork {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& w;
  const GbtParams& params;
};

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

SplitChoice best_split(const BoostWork& work, const std::vector<int>& rows,
                       const std::vector<int>& features,
                       const Eigen::VectorXd& grad, const Eigen::VectorXd& hess) {
  double g_total = 0.0, h_total = 0.0;
  for (int r : rows) {
    g_total += grad[r];
    h_total += hess[r];
  }
  const double lambda = work.params.reg_lambda;
  const double parent_score = g_total * g_total / (h_total + lambda);

  SplitChoice best;
  std::vector<std::pair<double, int>> order;
  order.reserve(rows.size());
  for (int f : features) {
    order.clear();
    for (int r : rows) order.emplace_back(work.x(r, f), r);
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double g_left = 0.0, h_left = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      g_left += grad[order[i].second];
      h_left += hess[order[i].second];
      if (order[i].first == order[i + 1].first) continue;
      const double h_right = h_total - h_left;
      if (h_left < work.params.min_child_weight || h_right < work.params.min_child_weight) {
        continue;
      }
      const double g_right = g_total - g_left;
      const double gain = 0.5 * (g_left * g_left / (h_left + lambda) +
                                 g_right * g_right / (h_right + lambda) - parent_score);
      if (gain > best.gain + 1e-12) {
        best.gain = gain;
        best.feature = f;
        best.threshold = 0.5 * (order[i].first + order[i + 1].first);
      }
    }
  }
  return best;
}

double leaf_value(double g, double h, const GbtParams& params) {
  double v = -g / (h + params.reg_lambda);
  if (params.max_delta_step > 0.0) {
    v = std::clamp(v, -params.max_delta_step, params.max_delta_step);
  }
  return params.learning_rate * v;
}

}  // namespace

Eigen::VectorXd FittedModel::margin(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  if (glm_) {
    if (glm_->beta.size() > 0) {
      if (x.cols() != glm_->beta.size()) {
        throw ConfigError("predict: column count differs from training data");
      }
      out = x * glm_->beta;
    }
    out.array() += glm_->intercept;
    return out;
  }
  if (ensemble_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double m = ensemble_->base_score;
      for (const auto& tree : ensemble_->trees) {
        int node = 0;
        while (tree[static_cast<std::size_t>(node)].feature >= 0) {
          const auto& nd = tree[static_cast<std::size_t>(node)];
          node = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        m += tree[static_cast<std::size_t>(node)].leaf;
      }
      out[i] = m;
    }
    return out;
  }
  return out;  // untrained model: zero margin
}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd eta = margin(x);
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    p[i] = clamp_prob(expit(eta[i]), options_.prediction_bound);
  }
  return p;
}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& offset) const {
  if (offset.size() != x.rows()) {
    throw ConfigError("predict: offset length must match x rows");
  }
  Eigen::VectorXd eta = margin(x) + offset;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    p[i] = clamp_prob(expit(eta[i]), options_.prediction_bound);
  }
  return p;
}

const GlmCoefficients* FittedModel::coefficients() const {
  return glm_ ? &*glm_ : nullptr;
}

FittedModel fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                        const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const Eigen::VectorXd* offset, const FitOptions& options) {
  check_inputs(x, y, w, offset);
  const Eigen::VectorXd wn = normalized(w);

  FittedModel model;
  model.spec_ = spec;
  model.options_ = options;

  if (spec.family == LearnerFamily::logistic || spec.family == LearnerFamily::l2_logistic) {
    const double lambda = spec.family == LearnerFamily::l2_logistic ? spec.lambda : 0.0;
    GlmFit fit = fit_glm(x, y, wn, offset, lambda, options);
    model.glm_ = std::move(fit.coef);
    model.diagnostics_ = std::move(fit.diag);
    const Eigen::VectorXd p =
        offset ? model.predict(x, *offset) : model.predict(x);
    model.diagnostics_.final_loss = mean_nll(y, p, wn);
    return model;
  }

  // Boosted trees.
  const GbtParams& params = spec.gbt;
  if (params.n_trees < 0 || params.max_depth < 0) {
    throw ConfigError("fit_learner: negative tree count or depth");
  }
  const Eigen::Index n = x.rows();
  const int n_features = static_cast<int>(x.cols());

  auto ensemble = std::make_shared<FittedModel::Ensemble>();
  if (!offset) {
    const double ybar = clamp_prob(wn.dot(y) / wn.sum(), 1e-12);
    ensemble->base_score = std::log(ybar / (1.0 - ybar));
  }

  Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, ensemble->base_score);
  if (offset) margin += *offset;

  std::mt19937_64 rng(params.seed);
  BoostWork work{x, y, wn, params};
  FitDiagnostics diag;
  diag.round_losses.reserve(static_cast<std::size_t>(params.n_trees));

  std::vector<int> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<int> all_features(static_cast<std::size_t>(n_features));
  std::iota(all_features.begin(), all_features.end(), 0);

  for (int round = 0; round < params.n_trees; ++round) {
    Eigen::VectorXd grad(n), hess(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = expit(margin[i]);
      grad[i] = wn[i] * (p - y[i]);
      hess[i] = wn[i] * std::max(p * (1.0 - p), 1e-16);
    }

    std::vector<int> rows;
    if (params.subsample < 1.0) {
      std::bernoulli_distribution keep(params.subsample);
      for (int r : all_rows) {
        if (keep(rng)) rows.push_back(r);
      }
      if (rows.empty()) rows = all_rows;
    } else {
      rows = all_rows;
    }

    std::vector<int> features = all_features;
    if (params.colsample < 1.0 && n_features > 1) {
      const int keep = std::max(1, static_cast<int>(std::ceil(params.colsample * n_features)));
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(static_cast<std::size_t>(keep));
      std::sort(features.begin(), features.end());
    }

    std::vector<FittedModel::TreeNode> tree;
    // Depth-first build with an explicit stack of (node id, rows, depth).
    struct Pending {
      int node;
      std::vector<int> rows;
      int depth;
    };
    tree.push_back({});
    std::vector<Pending> stack;
    stack.push_back({0, rows, 0});
    while (!stack.empty()) {
      Pending cur = std::move(stack.back());
      stack.pop_back();

      double g = 0.0, h = 0.0;
      for (int r : cur.rows) {
        g += grad[r];
        h += hess[r];
      }

      SplitChoice split;
      if (cur.depth < params.max_depth && n_features > 0 &&
          h >= 2.0 * params.min_child_weight) {
        split = best_split(work, cur.rows, features, grad, hess);
      }
      if (split.feature < 0) {
        tree[static_cast<std::size_t>(cur.node)].leaf = leaf_value(g, h, params);
        continue;
      }

      std::vector<int> left, right;
      for (int r : cur.rows) {
        (x(r, split.feature) <= split.threshold ? left : right).push_back(r);
      }
      if (left.empty() || right.empty()) {
        tree[static_cast<std::size_t>(cur.node)].leaf = leaf_value(g, h, params);
        continue;
      }

      const int left_id = static_cast<int>(tree.size());
      const int right_id = left_id + 1;
      tree.push_back({});
      tree.push_back({});
      auto& node = tree[static_cast<std::size_t>(cur.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left_id;
      node.right = right_id;
      stack.push_back({right_id, std::move(right), cur.depth + 1});
      stack.push_back({left_id, std::move(left), cur.depth + 1});
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      int node = 0;
      while (tree[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = tree[static_cast<std::size_t>(node)];
        node = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
      }
      margin[i] += tree[static_cast<std::size_t>(node)].leaf;
    }
    ensemble->trees.push_back(std::move(tree));

    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = expit(margin[i]);
    diag.round_losses.push_back(mean_nll(y, p, wn));
  }

  diag.iterations = params.n_trees;
  diag.converged = true;
  if (diag.round_losses.empty()) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = expit(margin[i]);
    diag.final_loss = mean_nll(y, p, wn);
  } else {
    diag.final_loss = diag.round_losses.back();
  }
  model.ensemble_ = std::move(ensemble);
  model.diagnostics_ = std::move(diag);
  return model;
}

}  // namespace longtmle
