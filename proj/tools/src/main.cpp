// Command-line front end: synthetic cohorts, daily-stream coarsening, full
// analysis runs and report reshaping. Failures print one JSON record on
// stderr and exit nonzero.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "longtmle/coarsen.hpp"
#include "longtmle/config.hpp"
#include "longtmle/oracle.hpp"
#include "longtmle/pipeline.hpp"
#include "longtmle/report.hpp"
#include "longtmle/stats.hpp"

namespace lt = longtmle;

namespace {

void emit_error(const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const lt::PositivityError*>(&e)) return "positivity";
  if (dynamic_cast<const lt::ParseError*>(&e)) return "parse";
  if (dynamic_cast<const lt::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const lt::Error*>(&e)) return "estimation";
  return "runtime";
}

lt::Dgp scenario_by_name(const std::string& name) {
  if (name == "discrete") return lt::discrete_world();
  if (name == "default") return lt::default_scenario();
  if (name == "coverage") return lt::coverage_scenario();
  if (name == "scale") return lt::scale_scenario();
  throw lt::ConfigError("unknown scenario '" + name + "'");
}

struct SimulateArgs {
  std::string scenario = "default";
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string daily_out;
  int unit_days = 90;
};

int run_simulate(const SimulateArgs& args) {
  const lt::Dgp dgp = scenario_by_name(args.scenario);
  if (!args.daily_out.empty()) {
    const auto streams = lt::simulate_daily(dgp, args.n, args.seed, args.unit_days);
    lt::write_daily_csv_file(streams, args.daily_out);
    std::cout << nlohmann::json{{"daily", args.daily_out}, {"subjects", args.n}}.dump()
              << '\n';
  }
  if (!args.out.empty()) {
    const lt::LongDataset data = lt::simulate_interval(dgp, args.n, args.seed);
    lt::write_long_csv_file(data, args.out);
    std::cout << nlohmann::json{{"long", args.out},
                                {"subjects", args.n},
                                {"rows", data.n_rows()}}
                     .dump()
              << '\n';
  }
  if (args.out.empty() && args.daily_out.empty()) {
    throw lt::ConfigError("simulate: pass --out and/or --daily-out");
  }
  return 0;
}

struct TruthArgs {
  std::string scenario = "default";
  std::vector<double> thetas;
  bool always = false;
  bool never = false;
  std::vector<int> t0s;
};

int run_truth(const TruthArgs& args) {
  const lt::Dgp dgp = scenario_by_name(args.scenario);
  if (args.t0s.empty()) throw lt::ConfigError("truth: pass at least one --t0");
  std::vector<lt::Regime> regimes;
  for (const double theta : args.thetas) regimes.push_back(lt::Regime::threshold(theta, "w"));
  if (args.always) regimes.push_back(lt::Regime::always_treat("w"));
  if (args.never) regimes.push_back(lt::Regime::never_treat("w"));
  if (regimes.empty()) throw lt::ConfigError("truth: pass --theta, --always or --never");

  nlohmann::json out = nlohmann::json::array();
  for (const auto& regime : regimes) {
    for (const int t0 : args.t0s) {
      out.push_back({{"regime", regime.label()},
                     {"t0", t0},
                     {"risk", lt::true_risk(dgp, regime, t0)}});
    }
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct CoarsenArgs {
  std::string in;
  std::string out;
  lt::CoarsenConfig config;
  std::string exposure = "any_day";
};

int run_coarsen(const CoarsenArgs& args) {
  lt::CoarsenConfig config = args.config;
  config.exposure = lt::exposure_rule_from_string(args.exposure);
  const auto streams = lt::read_daily_csv_file(args.in);
  const lt::LongDataset data = lt::coarsen_dataset(streams, config);
  lt::write_long_csv_file(data, args.out);
  std::cout << nlohmann::json{{"long", args.out},
                              {"subjects", data.n_subjects()},
                              {"rows", data.n_rows()}}
                   .dump()
            << '\n';
  return 0;
}

struct EstimateArgs {
  std::string config_path;
  std::string input_override;
  std::string output_override;
  int threads = -1;
};

int run_estimate(const EstimateArgs& args) {
  lt::AnalysisConfig config = lt::read_config_file(args.config_path);
  if (!args.input_override.empty()) config.input_csv = args.input_override;
  if (!args.output_override.empty()) config.output_dir = args.output_override;
  if (args.threads >= 0) config.threads = static_cast<std::size_t>(args.threads);

  const lt::RunArtifacts art = lt::run_analysis_files(config);
  nlohmann::json j;
  j["report"] = art.report_path;
  j["table"] = art.table_path;
  j["manifest"] = art.manifest_path;
  j["curves"] = art.curve_paths;
  j["estimates"] = art.report.estimates.size();
  j["risk_differences"] = art.report.rds.size();
  j["notes"] = art.report.notes.size();
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct ReportArgs {
  std::string in;
  std::string table;
  std::string curves_dir;
};

int run_report(const ReportArgs& args) {
  const lt::EstimateReport report = lt::read_report_json(args.in);
  if (!args.table.empty()) {
    lt::write_flat_table_file(report, args.table);
  }
  std::vector<std::string> curves;
  if (!args.curves_dir.empty()) {
    curves = lt::write_curves(report, args.curves_dir);
  }
  if (args.table.empty() && args.curves_dir.empty()) {
    lt::write_flat_table(report, std::cout);
    return 0;
  }
  nlohmann::json j;
  if (!args.table.empty()) j["table"] = args.table;
  if (!curves.empty()) j["curves"] = curves;
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterfactual cumulative risks under dynamic threshold treatment rules"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "draw a synthetic cohort with known truth");
  sim->add_option("--scenario", sim_args.scenario, "discrete|default|coverage|scale")
      ->check(CLI::IsMember({"discrete", "default", "coverage", "scale"}));
  sim->add_option("-n,--subjects", sim_args.n, "cohort size");
  sim->add_option("--seed", sim_args.seed, "rng seed");
  sim->add_option("--out", sim_args.out, "long-format csv path");
  sim->add_option("--daily-out", sim_args.daily_out, "daily event stream csv path");
  sim->add_option("--unit-days", sim_args.unit_days, "days per interval for --daily-out");

  TruthArgs truth_args;
  auto* truth = app.add_subcommand("truth", "print exact counterfactual risks");
  truth->add_option("--scenario", truth_args.scenario, "discrete|default|coverage|scale")
      ->check(CLI::IsMember({"discrete", "default", "coverage", "scale"}));
  truth->add_option("--theta", truth_args.thetas, "threshold(s)");
  truth->add_flag("--always", truth_args.always, "include the always-treat rule");
  truth->add_flag("--never", truth_args.never, "include the never-treat rule");
  truth->add_option("--t0", truth_args.t0s, "horizon(s)");

  CoarsenArgs coarsen_args;
  auto* coarsen = app.add_subcommand("coarsen", "bin daily event streams into intervals");
  coarsen->add_option("--in", coarsen_args.in, "daily stream csv")->required();
  coarsen->add_option("--out", coarsen_args.out, "long-format csv path")->required();
  coarsen->add_option("--unit-days", coarsen_args.config.time_unit_days, "days per interval");
  coarsen->add_option("--max-intervals", coarsen_args.config.max_intervals,
                      "administrative cut, in intervals");
  coarsen->add_option("--exposure", coarsen_args.exposure, "any_day|first_day|majority")
      ->check(CLI::IsMember({"any_day", "first_day", "majority"}));

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate", "run a configured analysis end to end");
  est->add_option("--config", est_args.config_path, "analysis config json")->required();
  est->add_option("--input", est_args.input_override, "override the configured input csv");
  est->add_option("--output-dir", est_args.output_override, "override the output directory");
  est->add_option("--threads", est_args.threads, "override the thread count");

  ReportArgs rep_args;
  auto* rep = app.add_subcommand("report", "reshape a stored report");
  rep->add_option("--in", rep_args.in, "report.json path")->required();
  rep->add_option("--table", rep_args.table, "write the flat csv table here");
  rep->add_option("--curves-dir", rep_args.curves_dir, "write per-regime curve csvs here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("cli", e.what());
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (sim->parsed()) return run_simulate(sim_args);
    if (truth->parsed()) return run_truth(truth_args);
    if (coarsen->parsed()) return run_coarsen(coarsen_args);
    if (est->parsed()) return run_estimate(est_args);
    if (rep->parsed()) return run_report(rep_args);
  } catch (const lt::Error& e) {
    emit_error(error_kind(e), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
  return 0;
}
