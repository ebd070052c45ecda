#pragma once

// Candidate regression learners for binary (possibly fractional) outcomes:
// an unpenalized logistic GLM, a ridge-penalized variant and gradient-boosted
// trees with second-order leaf updates. All three accept row weights and an
// optional offset on the logit scale, and all bound their predicted
// probabilities away from 0 and 1. Row weights are normalized to mean one
// internally so fits are invariant to rescaling the weight vector.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace longtmle {

enum class LearnerFamily { logistic, l2_logistic, gbt };

struct GbtParams {
  int n_trees = 50;
  int max_depth = 3;
  double learning_rate = 0.1;
  double subsample = 1.0;          // per-tree row sampling rate
  double colsample = 1.0;          // per-tree feature sampling rate
  double min_child_weight = 1.0;   // minimum hessian mass per child
  double max_delta_step = 0.0;     // cap on |leaf value| before shrinkage; 0 = off
  double reg_lambda = 1.0;         // L2 on leaf values
  std::uint64_t seed = 0;
};

struct LearnerSpec {
  LearnerFamily family = LearnerFamily::logistic;
  double lambda = 0.0;  // ridge penalty, l2_logistic only
  GbtParams gbt;
  std::string label;  // optional; display_label() derives one when empty

  static LearnerSpec logistic();
  static LearnerSpec ridge(double lambda);
  static LearnerSpec boosted(GbtParams params);

  std::string display_label() const;
};

struct FitDiagnostics {
  int iterations = 0;
  bool converged = true;
  double final_loss = 0.0;  // weighted mean negative log-likelihood
  // Training loss after each boosting round (gbt only).
  std::vector<double> round_losses;
};

struct FitOptions {
  bool intercept = true;  // GLM families only; trees carry a base score instead
  double prediction_bound = 1e-6;
  int max_iterations = 50;
  double tolerance = 1e-8;  // relative deviance change declaring convergence
};

struct GlmCoefficients {
  bool has_intercept = true;
  double intercept = 0.0;
  Eigen::VectorXd beta;
};

// A trained learner. Value type; cheap to copy for GLMs, tree ensembles share
// their node storage.
class FittedModel {
 public:
  FittedModel() = default;

  // Probabilities bounded into [bound, 1 - bound]. The offset overload must
  // be used when the model was trained with an offset.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x, const Eigen::VectorXd& offset) const;

  // Linear predictor / ensemble margin including base score, without the
  // offset contribution and without bounding.
  Eigen::VectorXd margin(const Eigen::MatrixXd& x) const;

  const LearnerSpec& spec() const { return spec_; }
  const FitDiagnostics& diagnostics() const { return diagnostics_; }

  // Coefficients for GLM families, nullptr for tree ensembles.
  const GlmCoefficients* coefficients() const;

 private:
  friend FittedModel fit_learner(const LearnerSpec&, const Eigen::MatrixXd&,
                                 const Eigen::VectorXd&, const Eigen::VectorXd&,
                                 const Eigen::VectorXd*, const FitOptions&);
  struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf = 0.0;  // shrinkage already applied
  };
  struct Ensemble {
    double base_score = 0.0;
    std::vector<std::vector<TreeNode>> trees;
  };

  LearnerSpec spec_;
  FitOptions options_;
  FitDiagnostics diagnostics_;
  std::optional<GlmCoefficients> glm_;
  std::shared_ptr<const Ensemble> ensemble_;
};

// Fits spec to (x, y, w) with an optional logit-scale offset. y may be
// fractional in [0, 1]. Throws ConfigError on empty data, zero total weight
// or dimension mismatches.
FittedModel fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                        const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const Eigen::VectorXd* offset = nullptr,
                        const FitOptions& options = {});

// Weighted mean negative log-likelihood of predictions p against y.
double mean_nll(const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                const Eigen::VectorXd& w);

}  // namespace longtmle
