#pragma once

// Discrete super learner: V-fold cross-validation over a list of candidate
// learners under weighted negative log-likelihood loss, selection of the
// single best candidate and a refit of the winner on all data. Folds are
// assigned at the subject level so every row of one subject lands in the same
// validation fold.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "longtmle/learners.hpp"

namespace longtmle {

// How a nuisance regression is estimated: a single logistic GLM, or
// cross-validated selection among a candidate list.
enum class Strategy { parametric, dsl };

std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& text);

struct CvPlan {
  int v_folds = 10;
  std::uint64_t seed = 0;
};

// fold_of_subject[i] in [0, v_folds); every fold non-empty.
struct FoldAssignment {
  int v_folds = 0;
  std::vector<int> fold_of_subject;
};

FoldAssignment make_folds(std::size_t n_subjects, const CvPlan& plan);

struct DslResult {
  std::vector<std::string> candidate_labels;
  // Cross-validated risk per candidate; +infinity when a candidate failed to
  // train on some fold.
  std::vector<double> cv_risks;
  std::size_t selected = 0;
  FittedModel model;  // winner refit on all rows
  std::vector<std::string> fit_errors;  // one message per failed candidate
};

// Selects among candidates for the regression of y on x with weights w and
// optional offset. subject_of_row maps each row to the subject ordinal used
// by folds. Ties in cv risk go to the earlier candidate in list order.
DslResult dsl_fit(const std::vector<LearnerSpec>& candidates,
                  const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w, const Eigen::VectorXd* offset,
                  const std::vector<std::size_t>& subject_of_row,
                  const FoldAssignment& folds, const FitOptions& options = {});

}  // namespace longtmle
