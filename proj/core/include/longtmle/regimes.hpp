#pragma once

// Dynamic threshold treatment rules: start treatment the first time the
// tracked biomarker exceeds theta and stay on it afterwards. The rule also
// prescribes no censoring, so "following the regime" requires both matching
// treatment decisions and remaining uncensored.

#include <string>
#include <vector>

#include "longtmle/data_model.hpp"

namespace longtmle {

struct Regime {
  double theta = 0.0;
  std::string biomarker;          // covariate column driving the rule
  bool threshold_inclusive = false;  // trigger on >= theta instead of > theta

  // Short display label, e.g. "d7.5". Degenerate thresholds print as
  // "always" / "never".
  std::string label() const;

  static Regime threshold(double theta, std::string biomarker);
  // Degenerate thresholds: always-treat triggers at every biomarker value,
  // never-treat at none.
  static Regime always_treat(std::string biomarker);
  static Regime never_treat(std::string biomarker);
};

// Rule-implied actions and adherence for one subject's observed rows.
struct RulePath {
  std::vector<std::uint8_t> a_rule;   // treatment the rule assigns at each k
  std::vector<std::uint8_t> follows;  // observed actions (treatment and
                                      // censoring) match the rule through k
};

// a_rule(k) = 1 once the rule has triggered: either it already held at k-1 or
// the current biomarker crosses theta. follows(k) is monotone non-increasing
// and drops to 0 at a censored row, since the rule prescribes no censoring.
RulePath rule_path(const LongDataset& data, const Subject& subject, const Regime& regime);

std::vector<RulePath> rule_paths(const LongDataset& data, const Regime& regime);

}  // namespace longtmle
