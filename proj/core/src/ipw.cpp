#include "longtmle/ipw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "longtmle/parallel.hpp"
#include "longtmle/stats.hpp"

namespace longtmle {

namespace {

// Weighted hazards for intervals 0..t_max. hazard[k] is NaN past the first
// interval with no weighted at-risk mass.
std::vector<double> weighted_hazards(const LongDataset& data, const WeightTable& weights,
                                     int t_max) {
  std::vector<double> num(static_cast<std::size_t>(t_max) + 1, 0.0);
  std::vector<double> den(static_cast<std::size_t>(t_max) + 1, 0.0);
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& subj = data.subjects[i];
    const int last = std::min(subj.last_t(), t_max);
    for (int k = 0; k <= last; ++k) {
      const auto& row = subj.rows[static_cast<std::size_t>(k)];
      if (row.a_cens != CensorCause::none) continue;
      const double w = weights.weight(i, k);
      if (w == 0.0) continue;
      den[static_cast<std::size_t>(k)] += w;
      if (*row.y == 1) num[static_cast<std::size_t>(k)] += w;
    }
  }
  std::vector<double> hazard(static_cast<std::size_t>(t_max) + 1);
  for (int k = 0; k <= t_max; ++k) {
    hazard[static_cast<std::size_t>(k)] =
        den[static_cast<std::size_t>(k)] > 0.0
            ? num[static_cast<std::size_t>(k)] / den[static_cast<std::size_t>(k)]
            : std::numeric_limits<double>::quiet_NaN();
  }
  return hazard;
}

}  // namespace

IpwFit ipw_risk(const LongDataset& data, const WeightTable& weights, const Regime& regime,
                int t0) {
  if (t0 < 0) throw ConfigError("ipw_risk: t0 must be non-negative");
  const std::vector<double> hazard = weighted_hazards(data, weights, t0);

  IpwFit fit;
  fit.regime_label = regime.label();
  fit.t0 = t0;
  double surv = 1.0;
  for (int k = 0; k <= t0; ++k) {
    const double h = hazard[static_cast<std::size_t>(k)];
    if (std::isnan(h)) {
      throw PositivityError("ipw_risk: no weighted at-risk mass at interval " +
                            std::to_string(k) + " for regime " + regime.label());
    }
    fit.hazards.push_back(h);
    surv *= 1.0 - h;
  }
  fit.risk = 1.0 - surv;
  return fit;
}

std::vector<IpwCurvePoint> ipw_curve(const LongDataset& data, const WeightTable& weights,
                                     const Regime& regime, const std::vector<int>& t0_grid) {
  std::vector<IpwCurvePoint> points(t0_grid.size());
  if (t0_grid.empty()) return points;
  const int t_max = *std::max_element(t0_grid.begin(), t0_grid.end());
  const std::vector<double> hazard = weighted_hazards(data, weights, t_max);

  for (std::size_t idx = 0; idx < t0_grid.size(); ++idx) {
    points[idx].t0 = t0_grid[idx];
    IpwFit fit;
    fit.regime_label = regime.label();
    fit.t0 = t0_grid[idx];
    double surv = 1.0;
    bool ok = true;
    for (int k = 0; k <= t0_grid[idx]; ++k) {
      const double h = hazard[static_cast<std::size_t>(k)];
      if (std::isnan(h)) {
        points[idx].error = "ipw_risk: no weighted at-risk mass at interval " +
                            std::to_string(k) + " for regime " + regime.label();
        ok = false;
        break;
      }
      fit.hazards.push_back(h);
      surv *= 1.0 - h;
    }
    if (ok) {
      fit.risk = 1.0 - surv;
      points[idx].fit = std::move(fit);
    }
  }
  return points;
}

IpwBootstrapResult ipw_bootstrap(const LongDataset& data, const GModel& g,
                                 const std::vector<Regime>& regimes,
                                 const WeightConfig& weight_config,
                                 const std::vector<int>& t0_grid, int n_resamples,
                                 std::uint64_t seed, double level, const GModel* stabilizer,
                                 std::size_t n_threads) {
  if (n_resamples < 2) throw ConfigError("ipw_bootstrap: need at least 2 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("ipw_bootstrap: bad level");
  const std::size_t n = data.n_subjects();
  const std::size_t n_regimes = regimes.size();
  const std::size_t n_h = t0_grid.size();
  const std::size_t n_pairs = n_regimes * (n_regimes - 1) / 2;

  // draw[b][r][h]: risk estimate on resample b; NaN when that resample
  // aborted for the (regime, horizon).
  std::vector<std::vector<std::vector<double>>> draw(
      static_cast<std::size_t>(n_resamples),
      std::vector<std::vector<double>>(n_regimes, std::vector<double>(n_h)));

  parallel_for(
      static_cast<std::size_t>(n_resamples),
      [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(seed, b));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);

        LongDataset sample;
        sample.covariate_names = data.covariate_names;
        sample.subjects.reserve(n);
        for (std::size_t i = 0; i < n; ++i) sample.subjects.push_back(data.subjects[pick(rng)]);

        try {
          const GModel gb = refit_g(sample, g);
          GModel stab_b;
          if (stabilizer) stab_b = refit_g(sample, *stabilizer);
          for (std::size_t r = 0; r < n_regimes; ++r) {
            const std::vector<RulePath> paths = rule_paths(sample, regimes[r]);
            const WeightTable w = compute_weights(sample, gb, paths, weight_config,
                                                  stabilizer ? &stab_b : nullptr);
            const std::vector<IpwCurvePoint> pts = ipw_curve(sample, w, regimes[r], t0_grid);
            for (std::size_t h = 0; h < n_h; ++h) {
              draw[b][r][h] = pts[h].fit ? pts[h].fit->risk
                                         : std::numeric_limits<double>::quiet_NaN();
            }
          }
        } catch (const std::exception&) {
          for (std::size_t r = 0; r < n_regimes; ++r) {
            for (std::size_t h = 0; h < n_h; ++h) {
              draw[b][r][h] = std::numeric_limits<double>::quiet_NaN();
            }
          }
        }
      },
      n_threads);

  const double alpha = 1.0 - level;
  auto summarize = [&](const std::vector<double>& values) {
    BootstrapInterval out;
    std::vector<double> good;
    good.reserve(values.size());
    for (double v : values) {
      if (!std::isnan(v)) good.push_back(v);
    }
    out.n_failed = values.size() - good.size();
    if (good.size() >= 2) {
      out.se = std::sqrt(sample_variance(good));
      out.lo = quantile(good, alpha / 2.0);
      out.hi = quantile(good, 1.0 - alpha / 2.0);
    }
    return out;
  };

  IpwBootstrapResult result;
  result.risks.assign(n_regimes, std::vector<BootstrapInterval>(n_h));
  result.rds.assign(n_pairs, std::vector<BootstrapInterval>(n_h));

  std::vector<double> values(static_cast<std::size_t>(n_resamples));
  for (std::size_t r = 0; r < n_regimes; ++r) {
    for (std::size_t h = 0; h < n_h; ++h) {
      for (int b = 0; b < n_resamples; ++b) values[static_cast<std::size_t>(b)] = draw[b][r][h];
      result.risks[r][h] = summarize(values);
    }
  }
  std::size_t pair = 0;
  for (std::size_t r1 = 0; r1 < n_regimes; ++r1) {
    for (std::size_t r2 = r1 + 1; r2 < n_regimes; ++r2, ++pair) {
      for (std::size_t h = 0; h < n_h; ++h) {
        for (int b = 0; b < n_resamples; ++b) {
          const double v1 = draw[b][r1][h];
          const double v2 = draw[b][r2][h];
          values[static_cast<std::size_t>(b)] =
              std::isnan(v1) || std::isnan(v2) ? std::numeric_limits<double>::quiet_NaN()
                                               : v1 - v2;
        }
        result.rds[pair][h] = summarize(values);
      }
    }
  }
  return result;
}

}  // namespace longtmle
