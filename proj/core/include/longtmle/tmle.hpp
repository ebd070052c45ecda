#pragma once

// Targeted maximum likelihood for the counterfactual cumulative risk of
// failure by interval t0 under a dynamic treatment rule, computed directly on
// long-format rows. The iterated-expectation recursion runs backward from t0:
// at each interval an initial regression of the running target on (treatment,
// covariate summary) is fit among at-risk rows, predictions are taken at the
// rule-assigned treatment, and an intercept fluctuation with cumulative
// inverse-probability weights moves the predictions so the weighted residuals
// at that interval sum to zero. The influence curve accumulates those
// weighted residuals plus the centered final prediction.

#include <optional>
#include <string>
#include <vector>

#include "longtmle/data_model.hpp"
#include "longtmle/propensity.hpp"
#include "longtmle/regimes.hpp"
#include "longtmle/superlearner.hpp"

namespace longtmle {

// stratified: initial regressions use only rows still following the rule.
// pooled: initial regressions use all at-risk uncensored rows.
enum class TmleMode { stratified, pooled };

std::string to_string(TmleMode mode);
TmleMode tmle_mode_from_string(const std::string& text);

struct QConfig {
  Strategy strategy = Strategy::parametric;
  std::vector<LearnerSpec> candidates;  // dsl only
  CvPlan cv;
  // main_effects: treatment plus summary columns. saturated: one indicator
  // per observed (treatment, summary) cell, giving within-cell means.
  enum class Design { main_effects, saturated };
  Design design = Design::main_effects;
  double q_min = kDefaultQMin;
};

struct TmleStep {
  int k = 0;
  std::size_t n_fit_rows = 0;
  std::size_t n_at_risk = 0;
  // Prediction rows whose (treatment, summary) cell never appeared in
  // training; saturated design only. Such rows get the fit-set mean.
  std::size_t unseen_cells = 0;
  double epsilon = 0.0;
  bool zero_weight = false;    // no positive weights; fluctuation skipped
  bool epsilon_capped = false;  // |epsilon| hit the safety bound
  double score = 0.0;  // sum of weighted residuals after targeting
  std::string selected_label;
};

struct TmleFit {
  std::string regime_label;
  int t0 = 0;
  double psi = 0.0;  // estimated cumulative risk by t0

  std::vector<double> q_star0;  // targeted predictions at k = 0, per subject
  std::vector<double> eic;      // influence curve values, per subject
  std::vector<TmleStep> steps;  // indexed t0 down to 0, in fit order
};

// Estimates the risk by t0 for followers of regime. paths and weights must
// come from the same regime. Throws PositivityError when no usable rows
// remain at some interval, and Error when a subject's rows end uncensored
// and failure-free before t0.
TmleFit tmle_estimate(const LongDataset& data, const Regime& regime,
                      const std::vector<RulePath>& paths, const WeightTable& weights,
                      const SummaryMap& map, int t0, TmleMode mode,
                      const QConfig& config);

struct TmleCurvePoint {
  int t0 = 0;
  std::optional<TmleFit> fit;  // empty on failure
  std::string error;
};

// Independent fits over a grid of horizons, run across threads.
std::vector<TmleCurvePoint> tmle_curve(const LongDataset& data, const Regime& regime,
                                       const std::vector<RulePath>& paths,
                                       const WeightTable& weights, const SummaryMap& map,
                                       const std::vector<int>& t0_grid, TmleMode mode,
                                       const QConfig& config, std::size_t n_threads = 0);

}  // namespace longtmle
