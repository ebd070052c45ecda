#include "longtmle/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "longtmle/stats.hpp"

namespace longtmle {

std::size_t MechanismDesign::dimension() const {
  std::size_t d = summary_dim;
  if (time_term) d += 1;
  if (coarse_bin > 0 && n_bins > 1) d += static_cast<std::size_t>(n_bins - 1);
  if (treat_column) d += 1;
  return d;
}

void MechanismDesign::fill(const Subject& subject, int k, int a_t, double* out) const {
  summary.fill(subject, k, out);
  std::size_t j = summary_dim;
  if (time_term) out[j++] = static_cast<double>(k);
  if (coarse_bin > 0 && n_bins > 1) {
    const int bin = k / coarse_bin;
    // First bin is the reference level.
    for (int b = 1; b < n_bins; ++b) out[j++] = bin == b ? 1.0 : 0.0;
  }
  if (treat_column) out[j++] = static_cast<double>(a_t);
}

namespace {

int lag_treat(const Subject& subject, int k) {
  return k > 0 ? subject.rows[static_cast<std::size_t>(k - 1)].a_treat : 0;
}

struct PooledRows {
  std::vector<std::size_t> subject;
  std::vector<int> k;
};

GComponentFit fit_component(const LongDataset& data, const MechanismDesign& design,
                            const PooledRows& rows, const std::vector<double>& response,
                            const GConfig& config, const FoldAssignment* folds,
                            const LearnerSpec* forced) {
  GComponentFit out;
  out.n_rows = rows.subject.size();
  if (rows.subject.empty()) {
    out.degenerate = true;
    out.constant = config.p_min;
    out.selected_label = "degenerate(empty)";
    return out;
  }

  const double rate = mean(response);
  if (rate <= 0.0 || rate >= 1.0) {
    out.degenerate = true;
    out.constant = clamp_prob(rate, config.p_min);
    out.selected_label = "degenerate(constant)";
    return out;
  }

  const auto n = static_cast<Eigen::Index>(rows.subject.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(design.dimension()));
  std::vector<double> buf(design.dimension());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto si = rows.subject[static_cast<std::size_t>(i)];
    const int k = rows.k[static_cast<std::size_t>(i)];
    const auto& subj = data.subjects[si];
    design.fill(subj, k, subj.rows[static_cast<std::size_t>(k)].a_treat, buf.data());
    for (std::size_t j = 0; j < buf.size(); ++j) {
      x(i, static_cast<Eigen::Index>(j)) = buf[j];
    }
  }
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = response[static_cast<std::size_t>(i)];

  FitOptions options;
  options.prediction_bound = config.p_min;

  if (forced) {
    out.model = fit_learner(*forced, x, y, w, nullptr, options);
    out.selected_label = out.model.spec().display_label();
    return out;
  }

  if (config.strategy == Strategy::parametric) {
    out.model = fit_learner(LearnerSpec::logistic(), x, y, w, nullptr, options);
    out.selected_label = out.model.spec().display_label();
    return out;
  }

  if (config.candidates.empty()) {
    throw ConfigError("fit_g: dsl strategy needs a candidate list");
  }
  DslResult dsl = dsl_fit(config.candidates, x, y, w, nullptr, rows.subject, *folds, options);
  out.model = std::move(dsl.model);
  out.selected_label = dsl.candidate_labels[dsl.selected];
  out.cv_risks = std::move(dsl.cv_risks);
  return out;
}

// Specs to reuse when refitting; null entries fall back to plain logistic.
struct ForcedSpecs {
  LearnerSpec init, cont, dis, death;
};

double component_prob(const GComponentFit& fit, const MechanismDesign& design,
                      const Subject& subject, int k, int a_t) {
  if (fit.degenerate) return fit.constant;
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(design.dimension()));
  std::vector<double> buf(design.dimension());
  design.fill(subject, k, a_t, buf.data());
  for (std::size_t j = 0; j < buf.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = buf[j];
  return fit.model.predict(x)[0];
}

}  // namespace

double GModel::treat_prob(const LongDataset& data, std::size_t subject, int k) const {
  const auto& subj = data.subjects[subject];
  const GComponentFit& component = lag_treat(subj, k) == 1 ? cont : init;
  return component_prob(component, treat_design, subj, k, 0);
}

double GModel::censor_hazard(const LongDataset& data, std::size_t subject, int k,
                             CensorCause cause, int a_t) const {
  if (cause == CensorCause::admin) return admin_rate;
  const auto& subj = data.subjects[subject];
  const GComponentFit& component = cause == CensorCause::disenroll ? dis : death;
  return component_prob(component, censor_design, subj, k, a_t);
}

double GModel::uncensored_prob(const LongDataset& data, std::size_t subject, int k,
                               int a_t) const {
  return (1.0 - censor_hazard(data, subject, k, CensorCause::disenroll, a_t)) *
         (1.0 - censor_hazard(data, subject, k, CensorCause::death, a_t)) *
         (1.0 - admin_rate);
}

namespace {

GModel fit_g_impl(const LongDataset& data, const SummaryMap& map, const GConfig& config,
                  const ForcedSpecs* forced) {
  if (data.n_subjects() == 0) throw ConfigError("fit_g: empty dataset");
  GModel g;
  g.map = map;
  g.config = config;

  // The init/cont stratification already conditions on last interval's
  // treatment, so the treatment designs drop the lag column.
  SummaryMap treat_map = map;
  treat_map.lagged_treatment = false;
  const int n_bins = config.coarse_time_bin > 0 ? data.max_t() / config.coarse_time_bin + 1 : 0;

  g.treat_design.summary = ResolvedSummary(data, treat_map);
  g.treat_design.summary_dim = treat_map.dimension();
  g.treat_design.time_term = config.time_term;
  g.treat_design.coarse_bin = config.coarse_time_bin;
  g.treat_design.n_bins = n_bins;
  g.treat_design.treat_column = false;

  g.censor_design.summary = ResolvedSummary(data, map);
  g.censor_design.summary_dim = map.dimension();
  g.censor_design.time_term = config.time_term;
  g.censor_design.coarse_bin = config.coarse_time_bin;
  g.censor_design.n_bins = n_bins;
  g.censor_design.treat_column = true;

  PooledRows init_rows, cont_rows, dis_rows, death_rows;
  std::vector<double> init_y, cont_y, dis_y, death_y;
  std::size_t admin_n = 0, admin_events = 0;

  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& subj = data.subjects[i];
    for (int k = 0; k <= subj.last_t(); ++k) {
      const auto& row = subj.rows[static_cast<std::size_t>(k)];
      if (lag_treat(subj, k) == 1) {
        cont_rows.subject.push_back(i);
        cont_rows.k.push_back(k);
        cont_y.push_back(row.a_treat);
      } else {
        init_rows.subject.push_back(i);
        init_rows.k.push_back(k);
        init_y.push_back(row.a_treat);
      }
      dis_rows.subject.push_back(i);
      dis_rows.k.push_back(k);
      dis_y.push_back(row.a_cens == CensorCause::disenroll ? 1.0 : 0.0);
      if (row.a_cens != CensorCause::disenroll) {
        death_rows.subject.push_back(i);
        death_rows.k.push_back(k);
        death_y.push_back(row.a_cens == CensorCause::death ? 1.0 : 0.0);
        if (row.a_cens != CensorCause::death) {
          ++admin_n;
          if (row.a_cens == CensorCause::admin) ++admin_events;
        }
      }
    }
  }

  FoldAssignment folds;
  const FoldAssignment* folds_ptr = nullptr;
  if (!forced && config.strategy == Strategy::dsl) {
    folds = make_folds(data.n_subjects(), config.cv);
    folds_ptr = &folds;
  }

  g.init = fit_component(data, g.treat_design, init_rows, init_y, config, folds_ptr,
                         forced ? &forced->init : nullptr);
  g.cont = fit_component(data, g.treat_design, cont_rows, cont_y, config, folds_ptr,
                         forced ? &forced->cont : nullptr);
  g.dis = fit_component(data, g.censor_design, dis_rows, dis_y, config, folds_ptr,
                        forced ? &forced->dis : nullptr);
  g.death = fit_component(data, g.censor_design, death_rows, death_y, config, folds_ptr,
                          forced ? &forced->death : nullptr);
  g.admin_rate = admin_n > 0
                     ? clamp_prob(static_cast<double>(admin_events) / static_cast<double>(admin_n),
                                  config.p_min)
                     : config.p_min;
  return g;
}

}  // namespace

GModel fit_g(const LongDataset& data, const SummaryMap& map, const GConfig& config) {
  return fit_g_impl(data, map, config, nullptr);
}

GModel refit_g(const LongDataset& data, const GModel& original) {
  ForcedSpecs specs;
  specs.init = original.init.degenerate ? LearnerSpec::logistic() : original.init.model.spec();
  specs.cont = original.cont.degenerate ? LearnerSpec::logistic() : original.cont.model.spec();
  specs.dis = original.dis.degenerate ? LearnerSpec::logistic() : original.dis.model.spec();
  specs.death = original.death.degenerate ? LearnerSpec::logistic() : original.death.model.spec();
  return fit_g_impl(data, original.map, original.config, &specs);
}

double WeightTable::weight(std::size_t subject, int k) const {
  const auto& v = final_[subject];
  return k >= 0 && static_cast<std::size_t>(k) < v.size() ? v[static_cast<std::size_t>(k)] : 0.0;
}

double WeightTable::raw_weight(std::size_t subject, int k) const {
  const auto& v = raw_[subject];
  return k >= 0 && static_cast<std::size_t>(k) < v.size() ? v[static_cast<std::size_t>(k)] : 0.0;
}

int WeightTable::max_k(std::size_t subject) const {
  return static_cast<int>(final_[subject].size()) - 1;
}

std::vector<WeightSummary> WeightTable::summaries() const {
  int max_t = -1;
  for (const auto& v : final_) max_t = std::max(max_t, static_cast<int>(v.size()) - 1);

  std::vector<WeightSummary> out;
  for (int k = 0; k <= max_t; ++k) {
    WeightSummary s;
    s.k = k;
    std::vector<double> positive;
    double total = 0.0;
    for (const auto& v : final_) {
      if (static_cast<std::size_t>(k) >= v.size()) continue;
      ++s.n_rows;
      const double w = v[static_cast<std::size_t>(k)];
      total += w;
      if (w > 0.0) positive.push_back(w);
    }
    s.n_positive = positive.size();
    s.mean = s.n_rows > 0 ? total / static_cast<double>(s.n_rows) : 0.0;
    if (!positive.empty()) {
      s.min = *std::min_element(positive.begin(), positive.end());
      s.max = *std::max_element(positive.begin(), positive.end());
      s.q25 = quantile(positive, 0.25);
      s.median = quantile(positive, 0.5);
      s.q75 = quantile(positive, 0.75);
    }
    out.push_back(s);
  }
  return out;
}

WeightTable compute_weights(const LongDataset& data, const GProvider& g,
                            const std::vector<RulePath>& paths, const WeightConfig& config,
                            const GProvider* stabilizer) {
  if (paths.size() != data.n_subjects()) {
    throw ConfigError("compute_weights: one rule path per subject required");
  }
  if (config.stabilize && !stabilizer) {
    throw ConfigError("compute_weights: stabilization requires a numerator provider");
  }
  const double cap = config.stabilize
                         ? config.stabilized_truncation.value_or(
                               std::numeric_limits<double>::infinity())
                         : config.truncation.value_or(std::numeric_limits<double>::infinity());

  WeightTable table;
  table.final_.resize(data.n_subjects());
  table.raw_.resize(data.n_subjects());

  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& subj = data.subjects[i];
    const auto& path = paths[i];
    const std::size_t horizon = subj.rows.size();
    auto& fin = table.final_[i];
    auto& raw = table.raw_[i];
    fin.assign(horizon, 0.0);
    raw.assign(horizon, 0.0);

    double denom_cum = 1.0;
    double num_cum = 1.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      if (!path.follows[k]) break;  // zero from the first deviation on
      const int kk = static_cast<int>(k);
      const int a = subj.rows[k].a_treat;

      const double p1 = g.treat_prob(data, i, kk);
      const double treat_factor = a == 1 ? p1 : 1.0 - p1;
      const double uncens_factor = g.uncensored_prob(data, i, kk, a);
      denom_cum *= treat_factor * uncens_factor;

      if (config.stabilize) {
        const double np1 = stabilizer->treat_prob(data, i, kk);
        num_cum *= (a == 1 ? np1 : 1.0 - np1) * stabilizer->uncensored_prob(data, i, kk, a);
      }

      const double w = num_cum / denom_cum;
      raw[k] = w;
      if (w > cap) {
        fin[k] = cap;
        ++table.truncated_count_;
      } else {
        fin[k] = w;
      }
    }
  }
  return table;
}

}  // namespace longtmle
