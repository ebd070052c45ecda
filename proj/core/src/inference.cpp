#include "longtmle/inference.hpp"

#include <algorithm>
#include <cmath>

#include "longtmle/stats.hpp"

namespace longtmle {

double plugin_se(const std::vector<double>& eic) {
  const std::size_t n = eic.size();
  if (n == 0) throw ConfigError("plugin_se: empty influence vector");
  double ss = 0.0;
  for (double d : eic) ss += d * d;
  return std::sqrt(ss / static_cast<double>(n) / static_cast<double>(n));
}

WaldInterval wald_interval(double estimate, const std::vector<double>& eic, double level,
                           bool clip01) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("wald_interval: level must lie in (0, 1)");
  }
  WaldInterval out;
  out.estimate = estimate;
  out.se = plugin_se(eic);
  const double z = normal_quantile(0.5 + level / 2.0);
  out.lo = estimate - z * out.se;
  out.hi = estimate + z * out.se;
  if (clip01) {
    const double lo_c = std::max(out.lo, 0.0);
    const double hi_c = std::min(out.hi, 1.0);
    out.clipped = lo_c != out.lo || hi_c != out.hi;
    out.lo = lo_c;
    out.hi = hi_c;
  }
  return out;
}

RiskDifference risk_difference(const TmleFit& a, const TmleFit& b, double level) {
  if (a.eic.size() != b.eic.size()) {
    throw ConfigError("risk_difference: fits cover different samples");
  }
  if (a.t0 != b.t0) {
    throw ConfigError("risk_difference: fits target different horizons");
  }
  std::vector<double> diff(a.eic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.eic[i] - b.eic[i];

  RiskDifference rd;
  rd.regime_a = a.regime_label;
  rd.regime_b = b.regime_label;
  rd.t0 = a.t0;
  rd.estimate = a.psi - b.psi;
  rd.se = plugin_se(diff);
  const double z = normal_quantile(0.5 + level / 2.0);
  rd.lo = rd.estimate - z * rd.se;
  rd.hi = rd.estimate + z * rd.se;
  return rd;
}

}  // namespace longtmle
