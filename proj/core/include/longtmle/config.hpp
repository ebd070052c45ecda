#pragma once

// JSON-backed description of one analysis run: input data, treatment rules,
// covariate summary, nuisance estimation strategies, weighting, horizons and
// estimator choices.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "longtmle/propensity.hpp"
#include "longtmle/regimes.hpp"
#include "longtmle/tmle.hpp"

namespace longtmle {

struct AnalysisConfig {
  std::string input_csv;       // long-format rows; may stay empty for in-memory runs
  std::string output_dir = "longtmle_out";

  std::string biomarker;       // covariate driving the threshold rules
  bool threshold_inclusive = false;
  std::vector<double> thresholds;
  bool include_always = false;
  bool include_never = false;

  // Covariate summary entering every regression; empty means all covariates
  // in both the baseline and current blocks plus the treatment lag.
  std::optional<SummaryMap> summary;

  GConfig g;
  QConfig q;
  TmleMode mode = TmleMode::stratified;
  WeightConfig weights;

  std::vector<int> t0_grid;
  bool run_tmle = true;
  bool run_ipw = false;
  int ipw_resamples = 0;  // bootstrap size; 0 leaves the weighted risks without intervals
  double ci_level = 0.95;

  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency

  // Rules in report order: thresholds first, then always, then never.
  std::vector<Regime> regimes() const;
};

nlohmann::json to_json(const LearnerSpec& spec);
LearnerSpec learner_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AnalysisConfig& config);
AnalysisConfig config_from_json(const nlohmann::json& j);

AnalysisConfig read_config_file(const std::string& path);

// Structural checks that do not need the data: at least one rule, a named
// biomarker, a non-empty horizon grid, valid level and candidate lists.
void validate(const AnalysisConfig& config);

// FNV-1a over the canonical JSON dump; recorded in run manifests so outputs
// can be traced back to the exact configuration.
std::uint64_t config_fingerprint(const AnalysisConfig& config);

}  // namespace longtmle
