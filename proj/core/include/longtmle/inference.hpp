#pragma once

// Influence-curve based inference: plug-in variance from the estimated
// influence values, Wald intervals, and delta-method risk differences between
// two regimes fit on the same sample.

#include <vector>

#include "longtmle/tmle.hpp"

namespace longtmle {

struct WaldInterval {
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool clipped = false;  // an endpoint was pulled back into [0, 1]
};

// se^2 = mean(eic_i^2) / n, the plug-in sampling variance of the estimate.
double plugin_se(const std::vector<double>& eic);

// Wald interval at the given level; when clip01 the endpoints are clamped to
// the unit interval (risks are probabilities).
WaldInterval wald_interval(double estimate, const std::vector<double>& eic,
                           double level = 0.95, bool clip01 = true);

struct RiskDifference {
  std::string regime_a;
  std::string regime_b;
  int t0 = 0;
  double estimate = 0.0;  // risk(a) - risk(b)
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Difference of two risks estimated on the same subjects; the influence curve
// of the difference is the difference of influence curves.
RiskDifference risk_difference(const TmleFit& a, const TmleFit& b, double level = 0.95);

}  // namespace longtmle
