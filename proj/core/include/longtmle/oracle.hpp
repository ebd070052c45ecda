#pragma once

// Synthetic longitudinal data with known counterfactual risks: finite-state
// generating processes, interval- and daily-resolution simulators, exact
// truth by dynamic programming, and an independent closed-form recursion for
// the randomized discrete world.

#include <array>
#include <cstdint>
#include <vector>

#include "longtmle/coarsen.hpp"
#include "longtmle/data_model.hpp"
#include "longtmle/propensity.hpp"
#include "longtmle/regimes.hpp"

namespace longtmle {

// Linear predictor shared by every law in the generating process. The marker
// coefficient applies to (w - marker_center).
struct LogisticLaw {
  double intercept = 0.0;
  double l0 = 0.0;
  double marker = 0.0;
  double marker_center = 0.0;
  double treat = 0.0;
  double lag_treat = 0.0;
  double time = 0.0;

  double linear(double l0_value, double w, double a, double a_prev, int k) const;
  double prob(double l0_value, double w, double a, double a_prev, int k) const;
};

// The marker walks on a fixed ascending grid: at each transition the index
// moves up with probability expit(up)/2, down with expit(down)/2, and a move
// past either end collapses into staying.
struct MarkerModel {
  std::vector<double> levels;
  std::vector<double> init_probs_l0_0;
  std::vector<double> init_probs_l0_1;
  LogisticLaw up;
  LogisticLaw down;

  // (down, stay, up) probabilities for the next interval given this one.
  std::array<double, 3> step_probs(double l0_value, double a, int k, std::size_t index) const;
};

struct Dgp {
  int horizon = 7;   // last interval index; survivors past it exit uncensored
  double p_l0 = 0.5;
  MarkerModel marker;
  LogisticLaw treat_init;  // applies when the previous interval was untreated
  LogisticLaw treat_cont;
  double treat_floor = 0.01;  // treatment probabilities clamped to [floor, 1 - floor]
  bool censoring = true;
  LogisticLaw haz_disenroll;
  LogisticLaw haz_death;
  double admin_hazard = 0.0;
  LogisticLaw outcome;

  double treat_prob(double l0_value, double w, double a_prev, int k) const;
  double event_hazard(double l0_value, double w, double a, double a_prev, int k) const;
  // Probability of clearing all three censoring causes at interval k.
  double uncensored_prob(double l0_value, double w, double a, double a_prev, int k) const;
};

// Two-level marker, three intervals, randomized treatment, no censoring.
Dgp discrete_world();
// Five-level marker, eight intervals, confounded treatment, three censoring causes.
Dgp default_scenario();
// Two-level marker, four intervals; the outcome law drops the treatment lag so
// main-effects models match its final-interval form.
Dgp coverage_scenario();
// Near-zero hazards over a long horizon, for throughput runs.
Dgp scale_scenario(int horizon = 119);

// Covariate order is {l0, w}. Within an interval the order of play is
// marker, treatment, censoring (disenroll, death, administrative), outcome.
LongDataset simulate_interval(const Dgp& dgp, std::size_t n, std::uint64_t seed);

// Daily-resolution rendering of the same process: marker observations on
// interval boundaries, treatment episodes spanning treated intervals, event
// days placed inside their interval.
std::vector<DailyEventStream> simulate_daily(const Dgp& dgp, std::size_t n, std::uint64_t seed,
                                             int unit_days);

// Exact counterfactual risk by forward dynamic programming over
// (l0, marker index, previous treatment).
double true_risk(const Dgp& dgp, const Regime& regime, int t0);

struct McRisk {
  double risk = 0.0;
  double se = 0.0;
};

// Counterfactual risk by forced-rule simulation; cross-checks true_risk.
McRisk mc_risk(const Dgp& dgp, const Regime& regime, int t0, std::size_t reps,
               std::uint64_t seed);

// Iterated stratified cell means on the empirical distribution: the value a
// randomized-world targeted fit must reproduce. Implemented with hash-map
// averages, sharing no fitting code with the estimator. A consumed prediction
// cell with no fit rows falls back to the fit-set mean, and cell means are
// bounded by q_min, matching the estimator's saturated-design conventions.
double empirical_gcomp_risk(const LongDataset& data, const Regime& regime,
                            const SummaryMap& map, int t0,
                            double q_min = kDefaultQMin);

// Action mechanism that evaluates the generating laws instead of fitted
// models. Resolves the {l0, w} columns once against the dataset layout.
class TrueG : public GProvider {
 public:
  TrueG(const Dgp& dgp, const LongDataset& data);

  double treat_prob(const LongDataset& data, std::size_t subject, int k) const override;
  double uncensored_prob(const LongDataset& data, std::size_t subject, int k,
                         int a_t) const override;

 private:
  const Dgp* dgp_;
  std::size_t l0_col_ = 0;
  std::size_t w_col_ = 0;
};

}  // namespace longtmle
