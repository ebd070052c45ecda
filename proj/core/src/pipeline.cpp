#include "longtmle/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "longtmle/inference.hpp"
#include "longtmle/ipw.hpp"
#include "longtmle/stats.hpp"

namespace longtmle {

namespace {

// Seed streams for the independent random pieces of one run.
constexpr std::uint64_t kStreamGFolds = 1;
constexpr std::uint64_t kStreamQFolds = 2;
constexpr std::uint64_t kStreamBootstrap = 3;

class PhaseClock {
 public:
  template <typename Fn>
  void run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double, std::milli> elapsed =
        std::chrono::steady_clock::now() - start;
    phases_.emplace_back(name, elapsed.count());
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [name, ms] : phases_) {
      arr.push_back({{"phase", name}, {"ms", ms}});
    }
    return arr;
  }

 private:
  std::vector<std::pair<std::string, double>> phases_;
};

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

nlohmann::json component_summary(const GComponentFit& fit) {
  nlohmann::json j;
  j["rows"] = fit.n_rows;
  j["degenerate"] = fit.degenerate;
  if (fit.degenerate) {
    j["constant"] = fit.constant;
  } else {
    j["selected"] = fit.selected_label;
  }
  if (!fit.cv_risks.empty()) j["cv_risks"] = fit.cv_risks;
  return j;
}

}  // namespace

EstimateReport run_analysis(const LongDataset& data, const AnalysisConfig& config) {
  validate(config);
  if (data.n_subjects() == 0) throw ConfigError("run_analysis: empty dataset");

  PhaseClock clock;
  EstimateReport report;

  clock.run("validate", [&] {
    const std::vector<Violation> violations = validate(data);
    if (!violations.empty()) {
      const auto& v = violations.front();
      throw ConfigError("input data fails structural checks (" +
                        std::to_string(violations.size()) + " violations); first: subject '" +
                        v.subject_id + "' t=" + std::to_string(v.t) + ": " + v.message);
    }
  });

  const int max_t = data.max_t();
  for (const int t0 : config.t0_grid) {
    if (t0 > max_t) {
      throw ConfigError("run_analysis: t0=" + std::to_string(t0) +
                        " lies beyond the last observed interval " + std::to_string(max_t));
    }
  }

  const std::vector<Regime> regimes = config.regimes();
  const SummaryMap map = config.summary ? *config.summary : SummaryMap::default_map(data);

  GConfig g_config = config.g;
  g_config.cv.seed = derive_seed(config.seed, kStreamGFolds);

  GModel g;
  clock.run("fit_g", [&] { g = fit_g(data, map, g_config); });

  std::optional<GModel> stabilizer;
  if (config.weights.stabilize) {
    clock.run("fit_g_stabilizer", [&] {
      SummaryMap marginal;
      marginal.lagged_treatment = false;
      stabilizer = fit_g(data, marginal, g_config);
    });
  }

  std::vector<std::vector<RulePath>> paths(regimes.size());
  std::vector<WeightTable> tables(regimes.size());
  clock.run("weights", [&] {
    for (std::size_t r = 0; r < regimes.size(); ++r) {
      paths[r] = rule_paths(data, regimes[r]);
      tables[r] = compute_weights(data, g, paths[r], config.weights,
                                  stabilizer ? &*stabilizer : nullptr);
    }
  });

  nlohmann::json truncated = nlohmann::json::object();
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    for (const WeightSummary& s : tables[r].summaries()) {
      report.weight_summaries.push_back({regimes[r].label(), s});
    }
    truncated[regimes[r].label()] = tables[r].truncated_count();
  }

  std::vector<int> grid = config.t0_grid;
  std::sort(grid.begin(), grid.end());

  if (config.run_tmle) {
    QConfig q_config = config.q;
    q_config.cv.seed = derive_seed(config.seed, kStreamQFolds);

    std::vector<std::vector<TmleCurvePoint>> points(regimes.size());
    clock.run("tmle", [&] {
      for (std::size_t r = 0; r < regimes.size(); ++r) {
        points[r] = tmle_curve(data, regimes[r], paths[r], tables[r], map, grid,
                               config.mode, q_config, config.threads);
      }
    });

    for (std::size_t r = 0; r < regimes.size(); ++r) {
      const std::string label = regimes[r].label();
      for (const TmleCurvePoint& point : points[r]) {
        if (!point.fit) {
          report.notes.push_back("tmle " + label + " t0=" + std::to_string(point.t0) +
                                 ": " + point.error);
          continue;
        }
        const WaldInterval ci =
            wald_interval(point.fit->psi, point.fit->eic, config.ci_level);
        report.estimates.push_back({"tmle", label, point.t0, ci.estimate, ci.se, ci.lo,
                                    ci.hi, ci.clipped});
        for (const TmleStep& step : point.fit->steps) {
          if (step.epsilon_capped) {
            report.notes.push_back("tmle " + label + " t0=" + std::to_string(point.t0) +
                                   ": fluctuation capped at k=" + std::to_string(step.k));
          }
          if (step.zero_weight) {
            report.notes.push_back("tmle " + label + " t0=" + std::to_string(point.t0) +
                                   ": no positive weights at k=" + std::to_string(step.k));
          }
        }
      }
    }

    for (std::size_t a = 0; a < regimes.size(); ++a) {
      for (std::size_t b = a + 1; b < regimes.size(); ++b) {
        for (std::size_t h = 0; h < grid.size(); ++h) {
          if (!points[a][h].fit || !points[b][h].fit) continue;
          const RiskDifference rd =
              risk_difference(*points[a][h].fit, *points[b][h].fit, config.ci_level);
          report.rds.push_back({"tmle", rd.regime_a, rd.regime_b, rd.t0, rd.estimate,
                                rd.se, rd.lo, rd.hi});
        }
      }
    }
  }

  if (config.run_ipw) {
    std::vector<std::vector<IpwCurvePoint>> points(regimes.size());
    clock.run("ipw", [&] {
      for (std::size_t r = 0; r < regimes.size(); ++r) {
        points[r] = ipw_curve(data, tables[r], regimes[r], grid);
      }
    });

    // Records keyed by (regime, horizon) so bootstrap intervals can be
    // attached after the fact.
    std::vector<std::vector<std::ptrdiff_t>> slot(
        regimes.size(), std::vector<std::ptrdiff_t>(grid.size(), -1));
    for (std::size_t r = 0; r < regimes.size(); ++r) {
      const std::string label = regimes[r].label();
      for (std::size_t h = 0; h < grid.size(); ++h) {
        const IpwCurvePoint& point = points[r][h];
        if (!point.fit) {
          report.notes.push_back("ipw " + label + " t0=" + std::to_string(point.t0) +
                                 ": " + point.error);
          continue;
        }
        slot[r][h] = static_cast<std::ptrdiff_t>(report.estimates.size());
        report.estimates.push_back(
            {"ipw", label, point.t0, point.fit->risk, 0.0, point.fit->risk,
             point.fit->risk, false});
      }
    }

    std::vector<std::vector<std::ptrdiff_t>> rd_slot;
    std::size_t pair_index = 0;
    for (std::size_t a = 0; a < regimes.size(); ++a) {
      for (std::size_t b = a + 1; b < regimes.size(); ++b) {
        rd_slot.emplace_back(grid.size(), -1);
        for (std::size_t h = 0; h < grid.size(); ++h) {
          if (!points[a][h].fit || !points[b][h].fit) continue;
          rd_slot[pair_index][h] = static_cast<std::ptrdiff_t>(report.rds.size());
          report.rds.push_back({"ipw", regimes[a].label(), regimes[b].label(),
                                grid[h], points[a][h].fit->risk - points[b][h].fit->risk,
                                0.0, 0.0, 0.0});
        }
        ++pair_index;
      }
    }

    if (config.ipw_resamples > 0) {
      IpwBootstrapResult boot;
      clock.run("ipw_bootstrap", [&] {
        boot = ipw_bootstrap(data, g, regimes, config.weights, grid,
                             config.ipw_resamples, derive_seed(config.seed, kStreamBootstrap),
                             config.ci_level, stabilizer ? &*stabilizer : nullptr,
                             config.threads);
      });
      std::size_t failed = 0;
      for (std::size_t r = 0; r < regimes.size(); ++r) {
        for (std::size_t h = 0; h < grid.size(); ++h) {
          if (slot[r][h] < 0) continue;
          const BootstrapInterval& bi = boot.risks[r][h];
          EstimateRecord& rec = report.estimates[static_cast<std::size_t>(slot[r][h])];
          rec.se = bi.se;
          rec.lo = bi.lo;
          rec.hi = bi.hi;
          failed = std::max(failed, bi.n_failed);
        }
      }
      for (std::size_t p = 0; p < rd_slot.size(); ++p) {
        for (std::size_t h = 0; h < grid.size(); ++h) {
          if (rd_slot[p][h] < 0) continue;
          const BootstrapInterval& bi = boot.rds[p][h];
          RdRecord& rec = report.rds[static_cast<std::size_t>(rd_slot[p][h])];
          rec.se = bi.se;
          rec.lo = bi.lo;
          rec.hi = bi.hi;
        }
      }
      if (failed > 0) {
        report.notes.push_back("ipw bootstrap: " + std::to_string(failed) + " of " +
                               std::to_string(config.ipw_resamples) +
                               " resamples failed and were dropped");
      }
    } else {
      report.notes.push_back(
          "ipw intervals need ipw_resamples > 0; reporting point estimates only");
    }
  }

  const std::size_t long_rows = data.n_rows();
  const std::size_t max_design_rows =
      std::max({g.init.n_rows, g.cont.n_rows, g.dis.n_rows, g.death.n_rows});

  nlohmann::json meta;
  meta["config"] = to_json(config);
  meta["config_fingerprint"] = hex64(config_fingerprint(config));
  meta["seed"] = config.seed;
  meta["n_subjects"] = data.n_subjects();
  meta["max_t"] = max_t;
  meta["rows"] = {{"long_rows", long_rows},
                  {"wide_equivalent_rows",
                   data.n_subjects() * (static_cast<std::size_t>(max_t) + 1)},
                  {"max_design_rows", max_design_rows}};
  meta["g"] = {{"init", component_summary(g.init)},
               {"cont", component_summary(g.cont)},
               {"disenroll", component_summary(g.dis)},
               {"death", component_summary(g.death)},
               {"admin_rate", g.admin_rate}};
  meta["weights_truncated"] = truncated;
  meta["phases"] = clock.to_json();
  report.metadata = std::move(meta);
  return report;
}

RunArtifacts run_analysis_files(const AnalysisConfig& config) {
  if (config.input_csv.empty()) {
    throw ConfigError("run_analysis_files: config.input is required");
  }
  const LongDataset data = read_long_csv_file(config.input_csv);

  RunArtifacts art;
  art.report = run_analysis(data, config);

  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);

  art.report_path = (dir / "report.json").string();
  write_report_json(art.report, art.report_path);

  art.table_path = (dir / "estimates.csv").string();
  write_flat_table_file(art.report, art.table_path);

  art.curve_paths = write_curves(art.report, dir.string());

  art.manifest_path = (dir / "manifest.json").string();
  std::ofstream out(art.manifest_path);
  if (!out) throw Error("cannot write manifest to '" + art.manifest_path + "'");
  out << art.report.metadata.dump(2) << '\n';
  return art;
}

}  // namespace longtmle
