#pragma once

// Result container produced by an analysis run: risk estimates, risk
// differences and weight diagnostics, with JSON round-trip and flat CSV /
// curve exports for downstream tabulation.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "longtmle/propensity.hpp"

namespace longtmle {

struct EstimateRecord {
  std::string estimator;  // "tmle" or "ipw"
  std::string regime;
  int t0 = 0;
  double risk = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool ci_clipped = false;
};

struct RdRecord {
  std::string estimator;
  std::string regime_a;
  std::string regime_b;
  int t0 = 0;
  double rd = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct WeightSummaryRecord {
  std::string regime;
  WeightSummary summary;
};

struct EstimateReport {
  std::vector<EstimateRecord> estimates;
  std::vector<RdRecord> rds;
  std::vector<WeightSummaryRecord> weight_summaries;
  // Human-readable notes: per-point failures, capped fluctuations and other
  // diagnostics worth surfacing without failing the run.
  std::vector<std::string> notes;
  // Config echo, seeds, selected learners, timings.
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const EstimateReport& report);
EstimateReport report_from_json(const nlohmann::json& j);

void write_report_json(const EstimateReport& report, const std::string& path);
EstimateReport read_report_json(const std::string& path);

// One row per estimate and per risk difference:
// kind,estimator,regime_a,regime_b,t0,estimate,se,lo,hi,ci_clipped
void write_flat_table(const EstimateReport& report, std::ostream& out);
void write_flat_table_file(const EstimateReport& report, const std::string& path);

// Per (estimator, regime): t0,risk,lo,hi rows ordered by t0, written to
// <dir>/curve_<estimator>_<regime>.csv. Returns the paths written.
std::vector<std::string> write_curves(const EstimateReport& report, const std::string& dir);

}  // namespace longtmle
