#pragma once

// Bounded inverse-probability-weighted estimator of the same cumulative
// risks: a weighted discrete-time hazard at each interval (saturated in
// time), combined by the product-limit formula. The ratio form keeps each
// hazard in [0, 1] and the risk in [0, 1] by construction.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "longtmle/data_model.hpp"
#include "longtmle/propensity.hpp"
#include "longtmle/regimes.hpp"

namespace longtmle {

struct IpwFit {
  std::string regime_label;
  int t0 = 0;
  double risk = 0.0;
  std::vector<double> hazards;  // intervals 0..t0
};

// Hazard at k: sum of weights on failing rows over sum of weights on at-risk
// uncensored rows at k. Throws PositivityError if no weight remains at some
// interval up to t0.
IpwFit ipw_risk(const LongDataset& data, const WeightTable& weights,
                const Regime& regime, int t0);

struct IpwCurvePoint {
  int t0 = 0;
  std::optional<IpwFit> fit;
  std::string error;
};

std::vector<IpwCurvePoint> ipw_curve(const LongDataset& data, const WeightTable& weights,
                                     const Regime& regime, const std::vector<int>& t0_grid);

struct BootstrapInterval {
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_failed = 0;  // resamples that aborted (positivity, fit errors)
};

struct IpwBootstrapResult {
  // risks[r][h]: per regime r, per horizon h; intervals aligned the same way.
  std::vector<std::vector<BootstrapInterval>> risks;
  // rd[p][h] for pairs p in the order (0,1), (0,2), ..., (1,2), ...
  std::vector<std::vector<BootstrapInterval>> rds;
};

// Nonparametric bootstrap over subjects. Each resample refits the action
// mechanism with the learner specs the original fit selected, rebuilds
// weights and recomputes every (regime, horizon) risk, so sampling error in
// the mechanism estimate is carried into the intervals. Percentile intervals
// at the given level.
IpwBootstrapResult ipw_bootstrap(const LongDataset& data, const GModel& g,
                                 const std::vector<Regime>& regimes,
                                 const WeightConfig& weight_config,
                                 const std::vector<int>& t0_grid, int n_resamples,
                                 std::uint64_t seed, double level,
                                 const GModel* stabilizer = nullptr,
                                 std::size_t n_threads = 0);

}  // namespace longtmle
