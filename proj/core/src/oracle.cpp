#include "longtmle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>

#include "longtmle/stats.hpp"

namespace longtmle {

namespace {

// 53-bit uniform draw; keeps streams identical across standard libraries.
double runif(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t sample_index(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

bool rule_triggers(const Regime& regime, double w) {
  return regime.threshold_inclusive ? w >= regime.theta : w > regime.theta;
}

}  // namespace

double LogisticLaw::linear(double l0_value, double w, double a, double a_prev, int k) const {
  return intercept + l0 * l0_value + marker * (w - marker_center) + treat * a +
         lag_treat * a_prev + time * static_cast<double>(k);
}

double LogisticLaw::prob(double l0_value, double w, double a, double a_prev, int k) const {
  return expit(linear(l0_value, w, a, a_prev, k));
}

std::array<double, 3> MarkerModel::step_probs(double l0_value, double a, int k,
                                              std::size_t index) const {
  const double w = levels[index];
  double p_up = 0.5 * up.prob(l0_value, w, a, 0.0, k);
  double p_down = 0.5 * down.prob(l0_value, w, a, 0.0, k);
  if (index == 0) p_down = 0.0;
  if (index + 1 == levels.size()) p_up = 0.0;
  return {p_down, 1.0 - p_down - p_up, p_up};
}

double Dgp::treat_prob(double l0_value, double w, double a_prev, int k) const {
  const LogisticLaw& law = a_prev > 0.5 ? treat_cont : treat_init;
  const double p = law.prob(l0_value, w, 0.0, a_prev, k);
  return std::min(std::max(p, treat_floor), 1.0 - treat_floor);
}

double Dgp::event_hazard(double l0_value, double w, double a, double a_prev, int k) const {
  return outcome.prob(l0_value, w, a, a_prev, k);
}

double Dgp::uncensored_prob(double l0_value, double w, double a, double a_prev, int k) const {
  if (!censoring) return 1.0;
  const double p_dis = haz_disenroll.prob(l0_value, w, a, a_prev, k);
  const double p_death = haz_death.prob(l0_value, w, a, a_prev, k);
  return (1.0 - p_dis) * (1.0 - p_death) * (1.0 - admin_hazard);
}

Dgp discrete_world() {
  Dgp d;
  d.horizon = 2;
  d.p_l0 = 0.5;
  d.marker.levels = {6.0, 9.0};
  d.marker.init_probs_l0_0 = {0.6, 0.4};
  d.marker.init_probs_l0_1 = {0.4, 0.6};
  d.marker.up = {-0.4, 0.0, 0.0, 0.0, -0.8, 0.0, 0.0};
  d.marker.down = {-0.2, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0};
  d.treat_init = {};  // constant 1/2
  d.treat_cont = {};
  d.censoring = false;
  d.admin_hazard = 0.0;
  d.outcome = {-0.8, 0.5, 0.3, 7.5, -0.6, 0.2, 0.25};
  return d;
}

Dgp default_scenario() {
  Dgp d;
  d.horizon = 7;
  d.p_l0 = 0.45;
  d.marker.levels = {6.2, 7.2, 7.7, 8.2, 9.0};
  d.marker.init_probs_l0_0 = {0.30, 0.30, 0.20, 0.15, 0.05};
  d.marker.init_probs_l0_1 = {0.10, 0.25, 0.25, 0.25, 0.15};
  d.marker.up = {-0.5, 0.4, 0.0, 0.0, -1.2, 0.0, 0.0};
  d.marker.down = {-0.9, -0.2, 0.0, 0.0, 1.3, 0.0, 0.0};
  d.treat_init = {-1.8, 0.4, 0.9, 7.5, 0.0, 0.0, 0.05};
  d.treat_cont = {2.2, 0.0, 0.3, 7.5, 0.0, 0.0, 0.0};
  d.censoring = true;
  d.haz_disenroll = {-3.0, 0.3, 0.0, 0.0, -0.3, 0.0, 0.0};
  d.haz_death = {-3.8, 0.5, 0.4, 7.5, 0.0, 0.0, 0.0};
  d.admin_hazard = 0.04;
  d.outcome = {-2.0, 0.7, 0.8, 7.5, -0.9, -0.3, 0.08};
  return d;
}

Dgp coverage_scenario() {
  Dgp d;
  d.horizon = 3;
  d.p_l0 = 0.5;
  d.marker.levels = {6.0, 9.0};
  d.marker.init_probs_l0_0 = {0.55, 0.45};
  d.marker.init_probs_l0_1 = {0.45, 0.55};
  d.marker.up = {-0.3, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0};
  d.marker.down = {-0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  d.treat_init = {-0.5, 0.3, 0.8, 7.5, 0.0, 0.0, 0.0};
  d.treat_cont = {2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  d.censoring = true;
  d.haz_disenroll = {-3.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0};
  d.haz_death = {-3.5, 0.0, 0.3, 7.5, 0.0, 0.0, 0.0};
  d.admin_hazard = 0.02;
  d.outcome = {-1.6, 0.6, 0.7, 7.5, -0.8, 0.0, 0.1};
  return d;
}

Dgp scale_scenario(int horizon) {
  Dgp d;
  d.horizon = horizon;
  d.p_l0 = 0.4;
  d.marker.levels = {6.5, 7.5, 8.5};
  d.marker.init_probs_l0_0 = {0.40, 0.35, 0.25};
  d.marker.init_probs_l0_1 = {0.30, 0.35, 0.35};
  d.marker.up = {-0.6, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0};
  d.marker.down = {-0.7, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0};
  d.treat_init = {-2.5, 0.3, 0.5, 7.5, 0.0, 0.0, 0.0};
  d.treat_cont = {2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  d.censoring = true;
  d.haz_disenroll = {-6.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  d.haz_death = {-7.0, 0.0, 0.2, 7.5, 0.0, 0.0, 0.0};
  d.admin_hazard = 0.001;
  d.outcome = {-6.0, 0.3, 0.3, 7.5, -0.3, 0.0, 0.002};
  return d;
}

LongDataset simulate_interval(const Dgp& dgp, std::size_t n, std::uint64_t seed) {
  LongDataset out;
  out.covariate_names = {"l0", "w"};
  out.subjects.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    Subject& subj = out.subjects[i];
    subj.id = "s" + std::to_string(i + 1);

    const double l0 = runif(rng) < dgp.p_l0 ? 1.0 : 0.0;
    const auto& init =
        l0 > 0.5 ? dgp.marker.init_probs_l0_1 : dgp.marker.init_probs_l0_0;
    std::size_t idx = sample_index(init, runif(rng));
    int a_prev = 0;

    for (int k = 0;; ++k) {
      const double w = dgp.marker.levels[idx];
      const int a = runif(rng) < dgp.treat_prob(l0, w, a_prev, k) ? 1 : 0;

      PersonTimeRow row;
      row.t = k;
      row.covariates = {l0, w};
      row.a_treat = a;
      row.a_cens = CensorCause::none;

      if (dgp.censoring) {
        if (runif(rng) < dgp.haz_disenroll.prob(l0, w, a, a_prev, k)) {
          row.a_cens = CensorCause::disenroll;
        } else if (runif(rng) < dgp.haz_death.prob(l0, w, a, a_prev, k)) {
          row.a_cens = CensorCause::death;
        } else if (runif(rng) < dgp.admin_hazard) {
          row.a_cens = CensorCause::admin;
        }
        if (row.a_cens != CensorCause::none) {
          subj.rows.push_back(std::move(row));
          break;
        }
      }

      const int y = runif(rng) < dgp.event_hazard(l0, w, a, a_prev, k) ? 1 : 0;
      row.y = y;
      subj.rows.push_back(std::move(row));
      if (y == 1 || k == dgp.horizon) break;

      const auto step = dgp.marker.step_probs(l0, a, k, idx);
      const double u = runif(rng);
      if (u < step[0]) {
        --idx;
      } else if (u >= step[0] + step[1]) {
        ++idx;
      }
      a_prev = a;
    }
  }
  return out;
}

std::vector<DailyEventStream> simulate_daily(const Dgp& dgp, std::size_t n,
                                             std::uint64_t seed, int unit_days) {
  if (unit_days <= 0) throw ConfigError("simulate_daily: unit_days must be positive");
  const LongDataset panel = simulate_interval(dgp, n, seed);
  const int u = unit_days;

  std::vector<DailyEventStream> out;
  out.reserve(n);
  for (const auto& subj : panel.subjects) {
    DailyEventStream s;
    s.subject_id = subj.id;
    s.entry_day = 0;

    const auto& last = subj.rows.back();
    const int last_k = last.t;
    if (last.a_cens == CensorCause::admin) {
      // End of the data window mid-interval; no explicit censoring record.
      s.end_day = last_k * u + u / 4;
    } else if (last.a_cens != CensorCause::none) {
      s.censor_day = last_k * u + std::min(u - 1, u / 3);
      s.censor_cause = last.a_cens;
      s.end_day = (last_k + 1) * u - 1;
    } else if (last.y && *last.y == 1) {
      s.failure_day = last_k * u + std::min(u - 1, u / 2);
      s.end_day = (last_k + 1) * u - 1;
    } else {
      s.end_day = (last_k + 1) * u - 1;
    }

    int episode_start = -1;
    for (const auto& row : subj.rows) {
      const int day = row.t * u;
      s.covariates.push_back({day, "l0", row.covariates[0]});
      s.covariates.push_back({day, "w", row.covariates[1]});
      if (row.a_treat == 1 && episode_start < 0) episode_start = day;
      if (row.a_treat == 0 && episode_start >= 0) {
        s.episodes.push_back({episode_start, day - 1});
        episode_start = -1;
      }
    }
    if (episode_start >= 0) {
      s.episodes.push_back({episode_start, std::min((last_k + 1) * u - 1, s.end_day)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

double true_risk(const Dgp& dgp, const Regime& regime, int t0) {
  if (t0 < 0 || t0 > dgp.horizon) {
    throw ConfigError("true_risk: t0 outside the process horizon");
  }
  const std::size_t m = dgp.marker.levels.size();

  // Alive, event-free mass entering interval k, by (l0, marker index, a_prev).
  std::vector<double> mass(2 * m * 2, 0.0);
  auto at = [m](std::vector<double>& v, int l0, std::size_t idx, int ap) -> double& {
    return v[(static_cast<std::size_t>(l0) * m + idx) * 2 + static_cast<std::size_t>(ap)];
  };

  for (int l0 = 0; l0 < 2; ++l0) {
    const double pl = l0 == 1 ? dgp.p_l0 : 1.0 - dgp.p_l0;
    const auto& init = l0 == 1 ? dgp.marker.init_probs_l0_1 : dgp.marker.init_probs_l0_0;
    for (std::size_t idx = 0; idx < m; ++idx) at(mass, l0, idx, 0) = pl * init[idx];
  }

  double risk = 0.0;
  for (int k = 0; k <= t0; ++k) {
    std::vector<double> next(2 * m * 2, 0.0);
    for (int l0 = 0; l0 < 2; ++l0) {
      for (std::size_t idx = 0; idx < m; ++idx) {
        const double w = dgp.marker.levels[idx];
        for (int ap = 0; ap < 2; ++ap) {
          const double mu = at(mass, l0, idx, ap);
          if (mu == 0.0) continue;
          const int a = (ap == 1 || rule_triggers(regime, w)) ? 1 : 0;
          const double h =
              dgp.event_hazard(static_cast<double>(l0), w, a, ap, k);
          risk += mu * h;
          if (k == t0) continue;
          const double survive = mu * (1.0 - h);
          const auto step = dgp.marker.step_probs(static_cast<double>(l0), a, k, idx);
          if (step[0] > 0.0) at(next, l0, idx - 1, a) += survive * step[0];
          at(next, l0, idx, a) += survive * step[1];
          if (step[2] > 0.0) at(next, l0, idx + 1, a) += survive * step[2];
        }
      }
    }
    mass.swap(next);
  }
  return risk;
}

McRisk mc_risk(const Dgp& dgp, const Regime& regime, int t0, std::size_t reps,
               std::uint64_t seed) {
  if (reps == 0) throw ConfigError("mc_risk: reps must be positive");
  std::size_t events = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    const double l0 = runif(rng) < dgp.p_l0 ? 1.0 : 0.0;
    const auto& init =
        l0 > 0.5 ? dgp.marker.init_probs_l0_1 : dgp.marker.init_probs_l0_0;
    std::size_t idx = sample_index(init, runif(rng));
    int ap = 0;
    for (int k = 0; k <= t0; ++k) {
      const double w = dgp.marker.levels[idx];
      const int a = (ap == 1 || rule_triggers(regime, w)) ? 1 : 0;
      if (runif(rng) < dgp.event_hazard(l0, w, a, ap, k)) {
        ++events;
        break;
      }
      if (k == t0) break;
      const auto step = dgp.marker.step_probs(l0, a, k, idx);
      const double u = runif(rng);
      if (u < step[0]) {
        --idx;
      } else if (u >= step[0] + step[1]) {
        ++idx;
      }
      ap = a;
    }
  }
  McRisk out;
  out.risk = static_cast<double>(events) / static_cast<double>(reps);
  out.se = std::sqrt(out.risk * (1.0 - out.risk) / static_cast<double>(reps));
  return out;
}

double empirical_gcomp_risk(const LongDataset& data, const Regime& regime,
                            const SummaryMap& map, int t0, double q_min) {
  const std::size_t n = data.n_subjects();
  if (n == 0) throw ConfigError("empirical_gcomp_risk: empty dataset");
  const std::vector<RulePath> paths = rule_paths(data, regime);
  const ResolvedSummary summary(data, map);
  const std::size_t sdim = map.dimension();

  std::vector<double> qt(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& subj = data.subjects[i];
    if (subj.last_t() >= t0) {
      const auto& row = subj.rows[static_cast<std::size_t>(t0)];
      if (row.y) qt[i] = static_cast<double>(*row.y);
    } else {
      const auto& row = subj.rows.back();
      if (row.y) {
        if (*row.y != 1) {
          throw Error("empirical_gcomp_risk: subject '" + subj.id +
                      "' ends uncensored and failure-free before t0");
        }
        qt[i] = 1.0;
      }
    }
  }

  std::vector<double> key(1 + sdim);
  for (int k = t0; k >= 0; --k) {
    std::map<std::vector<double>, std::pair<double, std::size_t>> cells;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& subj = data.subjects[i];
      if (subj.last_t() < k) continue;
      const auto& row = subj.rows[static_cast<std::size_t>(k)];
      if (row.a_cens != CensorCause::none) continue;
      if (!paths[i].follows[static_cast<std::size_t>(k)]) continue;
      if (std::isnan(qt[i])) {
        throw Error("empirical_gcomp_risk: undefined target at interval " + std::to_string(k));
      }
      key[0] = row.a_treat;
      summary.fill(subj, k, key.data() + 1);
      auto& cell = cells[key];
      cell.first += qt[i];
      cell.second += 1;
      total += qt[i];
      ++count;
    }
    if (count == 0) {
      throw PositivityError("empirical_gcomp_risk: no usable rows at interval " +
                            std::to_string(k));
    }
    const double fallback = clamp_prob(total / static_cast<double>(count), q_min);

    std::vector<std::pair<std::size_t, double>> updates;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& subj = data.subjects[i];
      if (subj.last_t() < k) continue;
      key[0] = paths[i].a_rule[static_cast<std::size_t>(k)];
      summary.fill(subj, k, key.data() + 1);
      const auto it = cells.find(key);
      const double value =
          it == cells.end()
              ? fallback
              : clamp_prob(it->second.first / static_cast<double>(it->second.second),
                           q_min);
      updates.emplace_back(i, value);
    }
    for (const auto& [i, value] : updates) qt[i] = value;
  }

  double acc = 0.0;
  for (double v : qt) acc += v;
  return acc / static_cast<double>(n);
}

TrueG::TrueG(const Dgp& dgp, const LongDataset& data)
    : dgp_(&dgp),
      l0_col_(data.covariate_index("l0")),
      w_col_(data.covariate_index("w")) {}

double TrueG::treat_prob(const LongDataset& data, std::size_t subject, int k) const {
  const auto& subj = data.subjects[subject];
  const double l0 = subj.rows.front().covariates[l0_col_];
  const double w = subj.rows[static_cast<std::size_t>(k)].covariates[w_col_];
  const double ap = k > 0 ? subj.rows[static_cast<std::size_t>(k - 1)].a_treat : 0.0;
  return dgp_->treat_prob(l0, w, ap, k);
}

double TrueG::uncensored_prob(const LongDataset& data, std::size_t subject, int k,
                              int a_t) const {
  const auto& subj = data.subjects[subject];
  const double l0 = subj.rows.front().covariates[l0_col_];
  const double w = subj.rows[static_cast<std::size_t>(k)].covariates[w_col_];
  const double ap = k > 0 ? subj.rows[static_cast<std::size_t>(k - 1)].a_treat : 0.0;
  return dgp_->uncensored_prob(l0, w, a_t, ap, k);
}

}  // namespace longtmle
