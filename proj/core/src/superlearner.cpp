#include "longtmle/superlearner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "longtmle/stats.hpp"

namespace longtmle {

std::string to_string(Strategy strategy) {
  return strategy == Strategy::parametric ? "parametric" : "dsl";
}

Strategy strategy_from_string(const std::string& text) {
  if (text == "parametric") return Strategy::parametric;
  if (text == "dsl") return Strategy::dsl;
  throw ParseError("unknown strategy '" + text + "'");
}

FoldAssignment make_folds(std::size_t n_subjects, const CvPlan& plan) {
  if (plan.v_folds < 2) throw ConfigError("make_folds: need at least 2 folds");
  if (n_subjects < static_cast<std::size_t>(plan.v_folds)) {
    throw ConfigError("make_folds: fewer subjects than folds");
  }
  std::vector<std::size_t> order(n_subjects);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(plan.seed);
  std::shuffle(order.begin(), order.end(), rng);

  FoldAssignment folds;
  folds.v_folds = plan.v_folds;
  folds.fold_of_subject.resize(n_subjects);
  // Round-robin over the shuffled order keeps fold sizes within one subject
  // of each other, so no fold can come out empty.
  for (std::size_t i = 0; i < n_subjects; ++i) {
    folds.fold_of_subject[order[i]] = static_cast<int>(i % static_cast<std::size_t>(plan.v_folds));
  }
  return folds;
}

namespace {

struct FoldRows {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> valid;
};

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

}  // namespace

DslResult dsl_fit(const std::vector<LearnerSpec>& candidates,
                  const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w, const Eigen::VectorXd* offset,
                  const std::vector<std::size_t>& subject_of_row,
                  const FoldAssignment& folds, const FitOptions& options) {
  if (candidates.empty()) throw ConfigError("dsl_fit: empty candidate list");
  if (subject_of_row.size() != static_cast<std::size_t>(x.rows())) {
    throw ConfigError("dsl_fit: subject_of_row length must match x rows");
  }
  for (std::size_t s : subject_of_row) {
    if (s >= folds.fold_of_subject.size()) {
      throw ConfigError("dsl_fit: subject ordinal outside fold assignment");
    }
  }

  std::vector<FoldRows> split(static_cast<std::size_t>(folds.v_folds));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int fold = folds.fold_of_subject[subject_of_row[static_cast<std::size_t>(i)]];
    for (int v = 0; v < folds.v_folds; ++v) {
      (v == fold ? split[static_cast<std::size_t>(v)].valid
                 : split[static_cast<std::size_t>(v)].train)
          .push_back(i);
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  DslResult result;
  result.cv_risks.assign(candidates.size(), 0.0);
  for (const auto& c : candidates) result.candidate_labels.push_back(c.display_label());

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double risk_sum = 0.0;
    int fold_count = 0;
    bool failed = false;
    for (int v = 0; v < folds.v_folds && !failed; ++v) {
      const auto& fr = split[static_cast<std::size_t>(v)];
      // A fold can hold no rows from this regression even though it holds
      // subjects; skip it rather than failing the candidate.
      if (fr.valid.empty() || fr.train.empty()) continue;
      try {
        const Eigen::MatrixXd x_tr = take_rows(x, fr.train);
        const Eigen::VectorXd y_tr = take(y, fr.train);
        const Eigen::VectorXd w_tr = take(w, fr.train);
        Eigen::VectorXd off_tr, off_va;
        if (offset) {
          off_tr = take(*offset, fr.train);
          off_va = take(*offset, fr.valid);
        }
        const FittedModel m = fit_learner(candidates[c], x_tr, y_tr, w_tr,
                                          offset ? &off_tr : nullptr, options);
        const Eigen::MatrixXd x_va = take_rows(x, fr.valid);
        const Eigen::VectorXd p = offset ? m.predict(x_va, off_va) : m.predict(x_va);
        risk_sum += mean_nll(take(y, fr.valid), p, take(w, fr.valid));
        ++fold_count;
      } catch (const std::exception& e) {
        failed = true;
        result.fit_errors.push_back(result.candidate_labels[c] + ": " + e.what());
      }
    }
    result.cv_risks[c] = (failed || fold_count == 0) ? inf
                                                     : risk_sum / static_cast<double>(fold_count);
  }

  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (result.cv_risks[c] < result.cv_risks[best]) best = c;
  }
  if (!std::isfinite(result.cv_risks[best])) {
    throw Error("dsl_fit: every candidate failed cross-validation");
  }
  result.selected = best;
  result.model = fit_learner(candidates[best], x, y, w, offset, options);
  return result;
}

}  // namespace longtmle
