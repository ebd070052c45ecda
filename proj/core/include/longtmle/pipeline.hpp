#pragma once

// End-to-end analysis: validate the data, fit the action mechanism, build
// per-rule weights, run the requested estimators over the horizon grid and
// assemble the report with a run manifest (config echo, fingerprint, seeds,
// row accounting and per-phase timings).

#include <string>
#include <vector>

#include "longtmle/config.hpp"
#include "longtmle/report.hpp"

namespace longtmle {

EstimateReport run_analysis(const LongDataset& data, const AnalysisConfig& config);

struct RunArtifacts {
  EstimateReport report;
  std::string report_path;    // <output_dir>/report.json
  std::string table_path;     // <output_dir>/estimates.csv
  std::string manifest_path;  // <output_dir>/manifest.json
  std::vector<std::string> curve_paths;
};

// Reads config.input_csv, runs the analysis and writes every artifact under
// config.output_dir (created if missing).
RunArtifacts run_analysis_files(const AnalysisConfig& config);

}  // namespace longtmle
