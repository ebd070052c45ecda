#pragma once

// Observed action mechanism: logistic hazard models for treatment initiation,
// treatment continuation and each censoring cause, pooled over time, plus the
// cumulative inverse-probability weights they imply for a given rule.
// Censoring models condition on the same interval's treatment decision, i.e.
// treatment is taken to precede censoring within an interval.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "longtmle/data_model.hpp"
#include "longtmle/regimes.hpp"
#include "longtmle/stats.hpp"
#include "longtmle/superlearner.hpp"

namespace longtmle {

// Per-interval action probabilities for a subject's observed history. The
// fitted GModel implements this; simulation code provides a ground-truth
// implementation so weights can be built from known probabilities.
class GProvider {
 public:
  virtual ~GProvider() = default;

  // P(A_treat(k) = 1 | observed history through k).
  virtual double treat_prob(const LongDataset& data, std::size_t subject, int k) const = 0;

  // P(uncensored through interval k | history, treatment a_t at k).
  virtual double uncensored_prob(const LongDataset& data, std::size_t subject, int k,
                                 int a_t) const = 0;
};

struct GConfig {
  Strategy strategy = Strategy::parametric;
  std::vector<LearnerSpec> candidates;  // dsl only
  CvPlan cv;
  bool time_term = true;    // interval index as a linear term
  int coarse_time_bin = 0;  // width (in intervals) of step indicators; 0 = off
  double p_min = kDefaultPMin;
};

struct GComponentFit {
  // A component degenerates when its stratum is empty or its response is
  // constant; it then predicts a clamped constant rate.
  bool degenerate = false;
  double constant = 0.0;
  FittedModel model;
  std::string selected_label;
  std::vector<double> cv_risks;  // populated under dsl
  std::size_t n_rows = 0;
};

// Layout of one mechanism design row: covariate summary, then time terms,
// then (for censoring models) the same interval's treatment.
struct MechanismDesign {
  ResolvedSummary summary;
  std::size_t summary_dim = 0;
  bool time_term = false;
  int coarse_bin = 0;
  int n_bins = 0;
  bool treat_column = false;

  std::size_t dimension() const;
  void fill(const Subject& subject, int k, int a_t, double* out) const;
};

class GModel : public GProvider {
 public:
  double treat_prob(const LongDataset& data, std::size_t subject, int k) const override;
  double uncensored_prob(const LongDataset& data, std::size_t subject, int k,
                         int a_t) const override;

  // Single-cause hazard at k given treatment a_t.
  double censor_hazard(const LongDataset& data, std::size_t subject, int k,
                       CensorCause cause, int a_t) const;

  GComponentFit init;   // treatment start, stratum A_treat(k-1) = 0
  GComponentFit cont;   // treatment continuation, stratum A_treat(k-1) = 1
  GComponentFit dis;    // disenrollment hazard
  GComponentFit death;  // death hazard
  double admin_rate = 0.0;  // intercept-only administrative hazard

  // Resolved against the training dataset's covariate layout; prediction
  // datasets must share that layout.
  MechanismDesign treat_design;
  MechanismDesign censor_design;

  SummaryMap map;
  GConfig config;
};

// Fits all components on rows pooled over intervals. map fixes the covariate
// summary entering each design; time enters per config.
GModel fit_g(const LongDataset& data, const SummaryMap& map, const GConfig& config);

// Refits every component on new data reusing the learner spec the original
// model selected. Bootstrap resampling uses this so candidate selection does
// not rerun inside the loop. Components that were degenerate refit as plain
// logistic fits (or degenerate again if the stratum stays constant).
GModel refit_g(const LongDataset& data, const GModel& original);

struct WeightConfig {
  // Cap applied to the cumulative weight; nullopt disables truncation.
  std::optional<double> truncation = 200.0;
  bool stabilize = false;
  std::optional<double> stabilized_truncation = 40.0;
};

struct WeightSummary {
  int k = 0;
  std::size_t n_rows = 0;      // subjects with a row at k
  std::size_t n_positive = 0;  // of those, positive weight
  double mean = 0.0;           // over all rows at k, zeros included
  double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;  // positive only
};

class WeightTable {
 public:
  // Final analysis weight for (subject, k): zero once the subject has
  // deviated from the rule or been censored, otherwise the (possibly
  // stabilized) truncated cumulative inverse probability.
  double weight(std::size_t subject, int k) const;
  // Same before applying the truncation cap.
  double raw_weight(std::size_t subject, int k) const;

  int max_k(std::size_t subject) const;
  std::size_t n_subjects() const { return final_.size(); }
  std::size_t truncated_count() const { return truncated_count_; }
  std::vector<WeightSummary> summaries() const;

  std::vector<std::vector<double>> final_;  // per subject, indexed by k
  std::vector<std::vector<double>> raw_;
  std::size_t truncated_count_ = 0;
};

// Cumulative weights for followers of the rule encoded by paths. stabilizer,
// when given, supplies numerator probabilities (typically a GModel fit with
// an empty covariate summary, i.e. intercept-plus-time hazards).
WeightTable compute_weights(const LongDataset& data, const GProvider& g,
                            const std::vector<RulePath>& paths,
                            const WeightConfig& config,
                            const GProvider* stabilizer = nullptr);

}  // namespace longtmle
