#include "longtmle/tmle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "longtmle/parallel.hpp"
#include "longtmle/stats.hpp"

namespace longtmle {

std::string to_string(TmleMode mode) {
  return mode == TmleMode::stratified ? "stratified" : "pooled";
}

TmleMode tmle_mode_from_string(const std::string& text) {
  if (text == "stratified") return TmleMode::stratified;
  if (text == "pooled") return TmleMode::pooled;
  throw ParseError("unknown tmle mode '" + text + "'");
}

namespace {

// One-hot encoder over observed (treatment, summary) cells. Keys compare by
// exact value, which is the intent: the saturated design is for discrete
// covariate spaces.
class CellEncoder {
 public:
  void add(const std::vector<double>& key) { index_.try_emplace(key, index_.size()); }

  std::size_t size() const { return index_.size(); }

  // Returns the cell column or npos for a combination never seen in training.
  std::size_t lookup(const std::vector<double>& key) const {
    const auto it = index_.find(key);
    return it == index_.end() ? npos : it->second;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::map<std::vector<double>, std::size_t> index_;
};

struct StepDesign {
  Eigen::MatrixXd x_fit;
  Eigen::MatrixXd x_pred;
  std::size_t unseen_cells = 0;  // prediction rows outside every training cell
};

// Intercept-only weighted logistic fluctuation with offset: solves
// sum_i w_i (y_i - expit(off_i + eps)) = 0 by safeguarded Newton.
struct FluctuationResult {
  double epsilon = 0.0;
  bool capped = false;
};

FluctuationResult solve_fluctuation(const std::vector<double>& y,
                                    const std::vector<double>& offset,
                                    const std::vector<double>& w, double cap) {
  double sw = 0.0;
  for (double v : w) sw += v;
  const double tol = 1e-12 * std::max(1.0, sw);

  auto score = [&](double eps) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (w[i] == 0.0) continue;
      s += w[i] * (y[i] - expit(offset[i] + eps));
    }
    return s;
  };

  double eps = 0.0;
  double f = score(eps);
  for (int iter = 0; iter < 100 && std::abs(f) > tol; ++iter) {
    double info = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (w[i] == 0.0) continue;
      const double p = expit(offset[i] + eps);
      info += w[i] * p * (1.0 - p);
    }
    if (info <= 0.0) break;
    double step = f / info;
    // The score is monotone decreasing in eps, so halve any step that fails
    // to shrink it.
    double next = eps + step;
    double fn = score(next);
    int halvings = 0;
    while (std::abs(fn) > std::abs(f) && halvings < 40) {
      step *= 0.5;
      next = eps + step;
      fn = score(next);
      ++halvings;
    }
    eps = next;
    f = fn;
    if (std::abs(eps) > cap) break;
  }

  FluctuationResult out;
  out.epsilon = eps;
  if (eps > cap) {
    out.epsilon = cap;
    out.capped = true;
  } else if (eps < -cap) {
    out.epsilon = -cap;
    out.capped = true;
  }
  return out;
}

}  // namespace

TmleFit tmle_estimate(const LongDataset& data, const Regime& regime,
                      const std::vector<RulePath>& paths, const WeightTable& weights,
                      const SummaryMap& map, int t0, TmleMode mode,
                      const QConfig& config) {
  const std::size_t n = data.n_subjects();
  if (n == 0) throw ConfigError("tmle_estimate: empty dataset");
  if (paths.size() != n) throw ConfigError("tmle_estimate: one rule path per subject required");
  if (t0 < 0) throw ConfigError("tmle_estimate: t0 must be non-negative");

  const ResolvedSummary summary(data, map);
  const std::size_t sdim = map.dimension();
  constexpr double kEpsilonCap = 10.0;

  FitOptions q_options;
  q_options.prediction_bound = config.q_min;
  // The recursion feeds each fit's predictions into the next, so initial fits
  // run to a tight tolerance.
  q_options.tolerance = 1e-12;
  q_options.max_iterations = 100;

  FoldAssignment folds;
  if (config.strategy == Strategy::dsl) {
    if (config.candidates.empty()) {
      throw ConfigError("tmle_estimate: dsl strategy needs a candidate list");
    }
    folds = make_folds(n, config.cv);
  }

  // Running backward targets. NaN marks slots with no defined value yet
  // (subjects censored at their last row); they are overwritten before any
  // fit can read them.
  std::vector<double> qtilde(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& subj = data.subjects[i];
    const int last = subj.last_t();
    if (last >= t0) {
      const auto& row = subj.rows[static_cast<std::size_t>(t0)];
      if (row.y) qtilde[i] = static_cast<double>(*row.y);
    } else {
      const auto& row = subj.rows.back();
      if (row.y) {
        if (*row.y != 1) {
          throw Error("tmle_estimate: subject '" + subj.id +
                      "' ends uncensored and failure-free before t0");
        }
        qtilde[i] = 1.0;
      }
      // censored before t0: overwritten at k = last
    }
  }

  TmleFit fit;
  fit.regime_label = regime.label();
  fit.t0 = t0;
  fit.eic.assign(n, 0.0);
  fit.steps.reserve(static_cast<std::size_t>(t0) + 1);

  std::vector<double> row_buf(sdim);

  for (int k = t0; k >= 0; --k) {
    // At-risk subjects: those with a row at k. Fit rows additionally need an
    // observed outcome target (uncensored at k) and, in stratified mode,
    // adherence to the rule through k.
    std::vector<std::size_t> at_risk;
    std::vector<std::size_t> fit_rows;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& subj = data.subjects[i];
      if (subj.last_t() < k) continue;
      at_risk.push_back(i);
      const auto& row = subj.rows[static_cast<std::size_t>(k)];
      if (row.a_cens != CensorCause::none) continue;
      if (mode == TmleMode::stratified && !paths[i].follows[static_cast<std::size_t>(k)]) {
        continue;
      }
      fit_rows.push_back(i);
    }
    if (fit_rows.empty()) {
      throw PositivityError("tmle_estimate: no usable rows at interval " + std::to_string(k) +
                            " for regime " + regime.label());
    }

    TmleStep step;
    step.k = k;
    step.n_fit_rows = fit_rows.size();
    step.n_at_risk = at_risk.size();

    // Assemble designs: fit rows at the observed treatment, prediction rows
    // for every at-risk subject at the rule-assigned treatment.
    Eigen::VectorXd y_fit(static_cast<Eigen::Index>(fit_rows.size()));
    for (std::size_t r = 0; r < fit_rows.size(); ++r) {
      const double v = qtilde[fit_rows[r]];
      if (std::isnan(v)) {
        throw Error("tmle_estimate: undefined target at interval " + std::to_string(k));
      }
      y_fit[static_cast<Eigen::Index>(r)] = v;
    }

    Eigen::MatrixXd x_fit, x_pred;
    std::vector<std::size_t> unseen_rows;
    std::vector<std::size_t> fit_cells, pred_cells;  // saturated design cell ids
    if (config.design == QConfig::Design::main_effects) {
      x_fit.resize(static_cast<Eigen::Index>(fit_rows.size()),
                   static_cast<Eigen::Index>(1 + sdim));
      for (std::size_t r = 0; r < fit_rows.size(); ++r) {
        const auto& subj = data.subjects[fit_rows[r]];
        x_fit(static_cast<Eigen::Index>(r), 0) =
            subj.rows[static_cast<std::size_t>(k)].a_treat;
        summary.fill(subj, k, row_buf.data());
        for (std::size_t j = 0; j < sdim; ++j) {
          x_fit(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(1 + j)) = row_buf[j];
        }
      }
      x_pred.resize(static_cast<Eigen::Index>(at_risk.size()),
                    static_cast<Eigen::Index>(1 + sdim));
      for (std::size_t r = 0; r < at_risk.size(); ++r) {
        const auto& subj = data.subjects[at_risk[r]];
        x_pred(static_cast<Eigen::Index>(r), 0) =
            paths[at_risk[r]].a_rule[static_cast<std::size_t>(k)];
        summary.fill(subj, k, row_buf.data());
        for (std::size_t j = 0; j < sdim; ++j) {
          x_pred(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(1 + j)) = row_buf[j];
        }
      }
    } else {
      CellEncoder cells;
      std::vector<std::vector<double>> fit_keys(fit_rows.size());
      for (std::size_t r = 0; r < fit_rows.size(); ++r) {
        const auto& subj = data.subjects[fit_rows[r]];
        std::vector<double> key(1 + sdim);
        key[0] = subj.rows[static_cast<std::size_t>(k)].a_treat;
        summary.fill(subj, k, key.data() + 1);
        cells.add(key);
        fit_keys[r] = std::move(key);
      }
      x_fit = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fit_rows.size()),
                                    static_cast<Eigen::Index>(cells.size()));
      fit_cells.resize(fit_rows.size());
      for (std::size_t r = 0; r < fit_rows.size(); ++r) {
        fit_cells[r] = cells.lookup(fit_keys[r]);
        x_fit(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(fit_cells[r])) = 1.0;
      }
      x_pred = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(at_risk.size()),
                                     static_cast<Eigen::Index>(cells.size()));
      std::vector<double> key(1 + sdim);
      pred_cells.resize(at_risk.size());
      for (std::size_t r = 0; r < at_risk.size(); ++r) {
        const auto& subj = data.subjects[at_risk[r]];
        key[0] = paths[at_risk[r]].a_rule[static_cast<std::size_t>(k)];
        summary.fill(subj, k, key.data() + 1);
        const std::size_t cell = cells.lookup(key);
        pred_cells[r] = cell;
        if (cell == CellEncoder::npos) {
          unseen_rows.push_back(r);
        } else {
          x_pred(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cell)) = 1.0;
        }
      }
    }
    step.unseen_cells = unseen_rows.size();

    FitOptions options = q_options;
    options.intercept = config.design == QConfig::Design::main_effects;

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(fit_rows.size()));
    // Initial predictions at the rule-assigned treatment, bounded before the
    // logit so the fluctuation offset stays finite.
    Eigen::VectorXd q_init;
    if (config.strategy == Strategy::parametric &&
        config.design == QConfig::Design::saturated) {
      // The one-hot design partitions the fit rows, so the unpenalized MLE is
      // the per-cell outcome mean. Computing it directly avoids iterating
      // IRLS to convergence at every interval of the recursion.
      Eigen::VectorXd num = Eigen::VectorXd::Zero(x_fit.cols());
      Eigen::VectorXd den = Eigen::VectorXd::Zero(x_fit.cols());
      for (std::size_t r = 0; r < fit_rows.size(); ++r) {
        num[static_cast<Eigen::Index>(fit_cells[r])] += y_fit[static_cast<Eigen::Index>(r)];
        den[static_cast<Eigen::Index>(fit_cells[r])] += 1.0;
      }
      q_init.resize(static_cast<Eigen::Index>(at_risk.size()));
      for (std::size_t r = 0; r < at_risk.size(); ++r) {
        const std::size_t c = pred_cells[r];
        q_init[static_cast<Eigen::Index>(r)] =
            c == CellEncoder::npos
                ? 0.5
                : clamp_prob(num[static_cast<Eigen::Index>(c)] /
                                 den[static_cast<Eigen::Index>(c)],
                             config.q_min);
      }
      step.selected_label = "glm";
    } else if (config.strategy == Strategy::parametric) {
      FittedModel model =
          fit_learner(LearnerSpec::logistic(), x_fit, y_fit, ones, nullptr, options);
      step.selected_label = model.spec().display_label();
      q_init = model.predict(x_pred);
    } else {
      DslResult dsl =
          dsl_fit(config.candidates, x_fit, y_fit, ones, nullptr, fit_rows, folds, options);
      step.selected_label = dsl.candidate_labels[dsl.selected];
      q_init = dsl.model.predict(x_pred);
    }
    if (!unseen_rows.empty()) {
      // A rule-assigned cell never seen among fit rows gets the fit-set mean,
      // the same prediction an intercept-only parent model would make.
      const double ybar = clamp_prob(y_fit.mean(), config.q_min);
      for (std::size_t r : unseen_rows) q_init[static_cast<Eigen::Index>(r)] = ybar;
    }

    // Fluctuation over fit rows with their cumulative weights.
    std::vector<double> fl_y, fl_off, fl_w;
    fl_y.reserve(fit_rows.size());
    std::vector<std::size_t> pred_slot(n, static_cast<std::size_t>(-1));
    for (std::size_t r = 0; r < at_risk.size(); ++r) pred_slot[at_risk[r]] = r;
    for (std::size_t r = 0; r < fit_rows.size(); ++r) {
      const std::size_t i = fit_rows[r];
      fl_y.push_back(qtilde[i]);
      fl_off.push_back(logit(q_init[static_cast<Eigen::Index>(pred_slot[i])], config.q_min));
      fl_w.push_back(weights.weight(i, k));
    }

    double total_weight = 0.0;
    for (double v : fl_w) total_weight += v;
    if (total_weight <= 0.0) {
      step.zero_weight = true;
      step.epsilon = 0.0;
    } else {
      const FluctuationResult fl = solve_fluctuation(fl_y, fl_off, fl_w, kEpsilonCap);
      step.epsilon = fl.epsilon;
      step.epsilon_capped = fl.capped;
    }

    // Targeted predictions overwrite the running targets of every at-risk
    // subject, including rows censored or failing at k.
    std::vector<double> q_star(at_risk.size());
    for (std::size_t r = 0; r < at_risk.size(); ++r) {
      q_star[r] = expit(logit(q_init[static_cast<Eigen::Index>(r)], config.q_min) + step.epsilon);
    }

    // Influence-curve terms at this interval: weighted residuals over at-risk
    // uncensored rows. Weights vanish for rule deviators, so only followers
    // contribute.
    double score = 0.0;
    for (std::size_t r = 0; r < at_risk.size(); ++r) {
      const std::size_t i = at_risk[r];
      const auto& row = data.subjects[i].rows[static_cast<std::size_t>(k)];
      if (row.a_cens != CensorCause::none) continue;
      const double w = weights.weight(i, static_cast<int>(k));
      if (w == 0.0) continue;
      const double term = w * (qtilde[i] - q_star[r]);
      fit.eic[i] += term;
      score += term;
    }
    step.score = score;

    for (std::size_t r = 0; r < at_risk.size(); ++r) qtilde[at_risk[r]] = q_star[r];
    fit.steps.push_back(std::move(step));
  }

  // Every subject has a row at k = 0, so qtilde now holds targeted
  // predictions for the full sample.
  fit.q_star0 = qtilde;
  double psi = 0.0;
  for (double v : qtilde) psi += v;
  psi /= static_cast<double>(n);
  fit.psi = psi;
  for (std::size_t i = 0; i < n; ++i) fit.eic[i] += qtilde[i] - psi;
  return fit;
}

std::vector<TmleCurvePoint> tmle_curve(const LongDataset& data, const Regime& regime,
                                       const std::vector<RulePath>& paths,
                                       const WeightTable& weights, const SummaryMap& map,
                                       const std::vector<int>& t0_grid, TmleMode mode,
                                       const QConfig& config, std::size_t n_threads) {
  std::vector<TmleCurvePoint> points(t0_grid.size());
  parallel_for(
      t0_grid.size(),
      [&](std::size_t idx) {
        points[idx].t0 = t0_grid[idx];
        try {
          points[idx].fit =
              tmle_estimate(data, regime, paths, weights, map, t0_grid[idx], mode, config);
        } catch (const std::exception& e) {
          points[idx].error = e.what();
        }
      },
      n_threads);
  return points;
}

}  // namespace longtmle
