#include "longtmle/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "longtmle/stats.hpp"

namespace longtmle {

namespace {

// Wraps json access so a bad field reports its path instead of a bare
// type_error.
template <typename T>
T field(const nlohmann::json& j, const std::string& key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config field '" + key + "': " + e.what());
  }
}

template <typename T>
T require(const nlohmann::json& j, const std::string& key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError("config field '" + key + "' is required");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config field '" + key + "': " + e.what());
  }
}

std::vector<LearnerSpec> candidates_from_json(const nlohmann::json& j, const std::string& key) {
  std::vector<LearnerSpec> out;
  const auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_array()) throw ParseError("config field '" + key + "' must be an array");
  for (const auto& entry : *it) out.push_back(learner_spec_from_json(entry));
  return out;
}

nlohmann::json strategy_block(const Strategy strategy, const std::vector<LearnerSpec>& candidates,
                              const CvPlan& cv) {
  nlohmann::json j;
  j["strategy"] = to_string(strategy);
  if (strategy == Strategy::dsl) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& spec : candidates) arr.push_back(to_json(spec));
    j["candidates"] = arr;
    j["v_folds"] = cv.v_folds;
  }
  return j;
}

}  // namespace

std::vector<Regime> AnalysisConfig::regimes() const {
  std::vector<Regime> out;
  for (const double theta : thresholds) {
    Regime r = Regime::threshold(theta, biomarker);
    r.threshold_inclusive = threshold_inclusive;
    out.push_back(std::move(r));
  }
  if (include_always) out.push_back(Regime::always_treat(biomarker));
  if (include_never) out.push_back(Regime::never_treat(biomarker));
  return out;
}

nlohmann::json to_json(const LearnerSpec& spec) {
  nlohmann::json j;
  switch (spec.family) {
    case LearnerFamily::logistic:
      j["family"] = "logistic";
      break;
    case LearnerFamily::l2_logistic:
      j["family"] = "l2";
      j["lambda"] = spec.lambda;
      break;
    case LearnerFamily::gbt:
      j["family"] = "gbt";
      j["n_trees"] = spec.gbt.n_trees;
      j["max_depth"] = spec.gbt.max_depth;
      j["learning_rate"] = spec.gbt.learning_rate;
      j["subsample"] = spec.gbt.subsample;
      j["colsample"] = spec.gbt.colsample;
      j["min_child_weight"] = spec.gbt.min_child_weight;
      j["max_delta_step"] = spec.gbt.max_delta_step;
      j["reg_lambda"] = spec.gbt.reg_lambda;
      j["seed"] = spec.gbt.seed;
      break;
  }
  if (!spec.label.empty()) j["label"] = spec.label;
  return j;
}

LearnerSpec learner_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("learner spec must be an object");
  const std::string family = require<std::string>(j, "family");
  LearnerSpec spec;
  if (family == "logistic") {
    spec = LearnerSpec::logistic();
  } else if (family == "l2") {
    spec = LearnerSpec::ridge(require<double>(j, "lambda"));
  } else if (family == "gbt") {
    GbtParams p;
    p.n_trees = field<int>(j, "n_trees", p.n_trees);
    p.max_depth = field<int>(j, "max_depth", p.max_depth);
    p.learning_rate = field<double>(j, "learning_rate", p.learning_rate);
    p.subsample = field<double>(j, "subsample", p.subsample);
    p.colsample = field<double>(j, "colsample", p.colsample);
    p.min_child_weight = field<double>(j, "min_child_weight", p.min_child_weight);
    p.max_delta_step = field<double>(j, "max_delta_step", p.max_delta_step);
    p.reg_lambda = field<double>(j, "reg_lambda", p.reg_lambda);
    p.seed = field<std::uint64_t>(j, "seed", p.seed);
    spec = LearnerSpec::boosted(p);
  } else {
    throw ParseError("unknown learner family '" + family + "'");
  }
  spec.label = field<std::string>(j, "label", std::string());
  return spec;
}

nlohmann::json to_json(const AnalysisConfig& config) {
  nlohmann::json j;
  j["input"] = config.input_csv;
  j["output_dir"] = config.output_dir;
  j["biomarker"] = config.biomarker;
  j["threshold_inclusive"] = config.threshold_inclusive;
  j["thresholds"] = config.thresholds;
  j["always"] = config.include_always;
  j["never"] = config.include_never;

  if (config.summary) {
    nlohmann::json s;
    s["baseline"] = config.summary->baseline;
    s["current"] = config.summary->current;
    s["lagged_treatment"] = config.summary->lagged_treatment;
    j["summary"] = s;
  }

  nlohmann::json g = strategy_block(config.g.strategy, config.g.candidates, config.g.cv);
  g["time_term"] = config.g.time_term;
  g["coarse_time_bin"] = config.g.coarse_time_bin;
  g["p_min"] = config.g.p_min;
  j["g"] = g;

  nlohmann::json q = strategy_block(config.q.strategy, config.q.candidates, config.q.cv);
  q["design"] = config.q.design == QConfig::Design::saturated ? "saturated" : "main_effects";
  q["q_min"] = config.q.q_min;
  j["q"] = q;

  j["mode"] = to_string(config.mode);

  nlohmann::json w;
  if (config.weights.truncation) {
    w["truncation"] = *config.weights.truncation;
  } else {
    w["truncation"] = nullptr;
  }
  w["stabilize"] = config.weights.stabilize;
  if (config.weights.stabilized_truncation) {
    w["stabilized_truncation"] = *config.weights.stabilized_truncation;
  } else {
    w["stabilized_truncation"] = nullptr;
  }
  j["weights"] = w;

  j["t0_grid"] = config.t0_grid;
  nlohmann::json estimators = nlohmann::json::array();
  if (config.run_tmle) estimators.push_back("tmle");
  if (config.run_ipw) estimators.push_back("ipw");
  j["estimators"] = estimators;
  j["ipw_resamples"] = config.ipw_resamples;
  j["ci_level"] = config.ci_level;
  j["seed"] = config.seed;
  j["threads"] = config.threads;
  return j;
}

AnalysisConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  AnalysisConfig c;
  c.input_csv = field<std::string>(j, "input", std::string());
  c.output_dir = field<std::string>(j, "output_dir", c.output_dir);
  c.biomarker = field<std::string>(j, "biomarker", std::string());
  c.threshold_inclusive = field<bool>(j, "threshold_inclusive", false);
  c.thresholds = field<std::vector<double>>(j, "thresholds", {});
  c.include_always = field<bool>(j, "always", false);
  c.include_never = field<bool>(j, "never", false);

  if (const auto it = j.find("summary"); it != j.end() && !it->is_null()) {
    SummaryMap map;
    map.baseline = field<std::vector<std::string>>(*it, "baseline", {});
    map.current = field<std::vector<std::string>>(*it, "current", {});
    map.lagged_treatment = field<bool>(*it, "lagged_treatment", true);
    c.summary = std::move(map);
  }

  if (const auto it = j.find("g"); it != j.end()) {
    c.g.strategy = strategy_from_string(field<std::string>(*it, "strategy", "parametric"));
    c.g.candidates = candidates_from_json(*it, "candidates");
    c.g.cv.v_folds = field<int>(*it, "v_folds", c.g.cv.v_folds);
    c.g.time_term = field<bool>(*it, "time_term", c.g.time_term);
    c.g.coarse_time_bin = field<int>(*it, "coarse_time_bin", c.g.coarse_time_bin);
    c.g.p_min = field<double>(*it, "p_min", c.g.p_min);
  }

  if (const auto it = j.find("q"); it != j.end()) {
    c.q.strategy = strategy_from_string(field<std::string>(*it, "strategy", "parametric"));
    c.q.candidates = candidates_from_json(*it, "candidates");
    c.q.cv.v_folds = field<int>(*it, "v_folds", c.q.cv.v_folds);
    const std::string design = field<std::string>(*it, "design", "main_effects");
    if (design == "main_effects") {
      c.q.design = QConfig::Design::main_effects;
    } else if (design == "saturated") {
      c.q.design = QConfig::Design::saturated;
    } else {
      throw ParseError("unknown q design '" + design + "'");
    }
    c.q.q_min = field<double>(*it, "q_min", c.q.q_min);
  }

  c.mode = tmle_mode_from_string(field<std::string>(j, "mode", "stratified"));

  if (const auto it = j.find("weights"); it != j.end()) {
    if (const auto t = it->find("truncation"); t != it->end()) {
      c.weights.truncation =
          t->is_null() ? std::nullopt : std::optional<double>(t->get<double>());
    }
    c.weights.stabilize = field<bool>(*it, "stabilize", false);
    if (const auto t = it->find("stabilized_truncation"); t != it->end()) {
      c.weights.stabilized_truncation =
          t->is_null() ? std::nullopt : std::optional<double>(t->get<double>());
    }
  }

  c.t0_grid = field<std::vector<int>>(j, "t0_grid", {});

  if (const auto it = j.find("estimators"); it != j.end()) {
    if (!it->is_array()) throw ParseError("config field 'estimators' must be an array");
    c.run_tmle = false;
    c.run_ipw = false;
    for (const auto& entry : *it) {
      const std::string name = entry.get<std::string>();
      if (name == "tmle") {
        c.run_tmle = true;
      } else if (name == "ipw") {
        c.run_ipw = true;
      } else {
        throw ParseError("unknown estimator '" + name + "'");
      }
    }
  }
  c.ipw_resamples = field<int>(j, "ipw_resamples", 0);
  c.ci_level = field<double>(j, "ci_level", 0.95);
  c.seed = field<std::uint64_t>(j, "seed", 1);
  c.threads = field<std::size_t>(j, "threads", 0);
  return c;
}

AnalysisConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void validate(const AnalysisConfig& config) {
  if (config.biomarker.empty()) throw ConfigError("config: biomarker name is required");
  if (config.thresholds.empty() && !config.include_always && !config.include_never) {
    throw ConfigError("config: at least one rule (threshold, always or never) is required");
  }
  for (const double theta : config.thresholds) {
    if (!std::isfinite(theta)) {
      throw ConfigError("config: thresholds must be finite; use always/never for the limits");
    }
  }
  {
    std::set<double> seen(config.thresholds.begin(), config.thresholds.end());
    if (seen.size() != config.thresholds.size()) {
      throw ConfigError("config: duplicate thresholds");
    }
  }
  if (config.t0_grid.empty()) throw ConfigError("config: t0_grid must be non-empty");
  for (const int t0 : config.t0_grid) {
    if (t0 < 0) throw ConfigError("config: t0_grid entries must be non-negative");
  }
  {
    std::set<int> seen(config.t0_grid.begin(), config.t0_grid.end());
    if (seen.size() != config.t0_grid.size()) throw ConfigError("config: duplicate t0_grid entries");
  }
  if (!(config.ci_level > 0.0 && config.ci_level < 1.0)) {
    throw ConfigError("config: ci_level must be in (0, 1)");
  }
  if (!config.run_tmle && !config.run_ipw) {
    throw ConfigError("config: no estimator selected");
  }
  if (config.g.strategy == Strategy::dsl && config.g.candidates.empty()) {
    throw ConfigError("config: g.strategy dsl needs a candidate list");
  }
  if (config.q.strategy == Strategy::dsl && config.q.candidates.empty()) {
    throw ConfigError("config: q.strategy dsl needs a candidate list");
  }
  if (config.ipw_resamples < 0) throw ConfigError("config: ipw_resamples must be non-negative");
  if (config.weights.truncation && *config.weights.truncation <= 0.0) {
    throw ConfigError("config: weights.truncation must be positive");
  }
  if (config.weights.stabilized_truncation && *config.weights.stabilized_truncation <= 0.0) {
    throw ConfigError("config: weights.stabilized_truncation must be positive");
  }
}

std::uint64_t config_fingerprint(const AnalysisConfig& config) {
  return fnv1a(to_json(config).dump());
}

}  // namespace longtmle
