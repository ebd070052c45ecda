#include "longtmle/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "longtmle/stats.hpp"

namespace longtmle {

namespace {

nlohmann::json estimate_to_json(const EstimateRecord& r) {
  return {{"estimator", r.estimator}, {"regime", r.regime}, {"t0", r.t0},
          {"risk", r.risk},           {"se", r.se},         {"lo", r.lo},
          {"hi", r.hi},               {"ci_clipped", r.ci_clipped}};
}

nlohmann::json rd_to_json(const RdRecord& r) {
  return {{"estimator", r.estimator},
          {"regime_a", r.regime_a},
          {"regime_b", r.regime_b},
          {"t0", r.t0},
          {"rd", r.rd},
          {"se", r.se},
          {"lo", r.lo},
          {"hi", r.hi}};
}

nlohmann::json weight_to_json(const WeightSummaryRecord& r) {
  return {{"regime", r.regime},
          {"k", r.summary.k},
          {"n_rows", r.summary.n_rows},
          {"n_positive", r.summary.n_positive},
          {"mean", r.summary.mean},
          {"min", r.summary.min},
          {"q25", r.summary.q25},
          {"median", r.summary.median},
          {"q75", r.summary.q75},
          {"max", r.summary.max}};
}

}  // namespace

nlohmann::json to_json(const EstimateReport& report) {
  nlohmann::json j;
  j["estimates"] = nlohmann::json::array();
  for (const auto& r : report.estimates) j["estimates"].push_back(estimate_to_json(r));
  j["risk_differences"] = nlohmann::json::array();
  for (const auto& r : report.rds) j["risk_differences"].push_back(rd_to_json(r));
  j["weight_summaries"] = nlohmann::json::array();
  for (const auto& r : report.weight_summaries) j["weight_summaries"].push_back(weight_to_json(r));
  j["notes"] = report.notes;
  j["metadata"] = report.metadata;
  return j;
}

EstimateReport report_from_json(const nlohmann::json& j) {
  EstimateReport report;
  for (const auto& e : j.at("estimates")) {
    EstimateRecord r;
    r.estimator = e.at("estimator").get<std::string>();
    r.regime = e.at("regime").get<std::string>();
    r.t0 = e.at("t0").get<int>();
    r.risk = e.at("risk").get<double>();
    r.se = e.at("se").get<double>();
    r.lo = e.at("lo").get<double>();
    r.hi = e.at("hi").get<double>();
    r.ci_clipped = e.at("ci_clipped").get<bool>();
    report.estimates.push_back(std::move(r));
  }
  for (const auto& e : j.at("risk_differences")) {
    RdRecord r;
    r.estimator = e.at("estimator").get<std::string>();
    r.regime_a = e.at("regime_a").get<std::string>();
    r.regime_b = e.at("regime_b").get<std::string>();
    r.t0 = e.at("t0").get<int>();
    r.rd = e.at("rd").get<double>();
    r.se = e.at("se").get<double>();
    r.lo = e.at("lo").get<double>();
    r.hi = e.at("hi").get<double>();
    report.rds.push_back(std::move(r));
  }
  for (const auto& e : j.at("weight_summaries")) {
    WeightSummaryRecord r;
    r.regime = e.at("regime").get<std::string>();
    r.summary.k = e.at("k").get<int>();
    r.summary.n_rows = e.at("n_rows").get<std::size_t>();
    r.summary.n_positive = e.at("n_positive").get<std::size_t>();
    r.summary.mean = e.at("mean").get<double>();
    r.summary.min = e.at("min").get<double>();
    r.summary.q25 = e.at("q25").get<double>();
    r.summary.median = e.at("median").get<double>();
    r.summary.q75 = e.at("q75").get<double>();
    r.summary.max = e.at("max").get<double>();
    report.weight_summaries.push_back(std::move(r));
  }
  report.notes = j.at("notes").get<std::vector<std::string>>();
  report.metadata = j.at("metadata");
  return report;
}

void write_report_json(const EstimateReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << to_json(report).dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

EstimateReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return report_from_json(j);
}

void write_flat_table(const EstimateReport& report, std::ostream& out) {
  out << "kind,estimator,regime_a,regime_b,t0,estimate,se,lo,hi,ci_clipped\n";
  std::ostringstream num;
  num.precision(10);
  auto fmt = [&num](double v) {
    num.str("");
    num << v;
    return num.str();
  };
  for (const auto& r : report.estimates) {
    out << "risk," << r.estimator << ',' << r.regime << ",," << r.t0 << ',' << fmt(r.risk)
        << ',' << fmt(r.se) << ',' << fmt(r.lo) << ',' << fmt(r.hi) << ','
        << (r.ci_clipped ? 1 : 0) << '\n';
  }
  for (const auto& r : report.rds) {
    out << "rd," << r.estimator << ',' << r.regime_a << ',' << r.regime_b << ',' << r.t0 << ','
        << fmt(r.rd) << ',' << fmt(r.se) << ',' << fmt(r.lo) << ',' << fmt(r.hi) << ",0\n";
  }
}

void write_flat_table_file(const EstimateReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_flat_table(report, out);
  if (!out) throw Error("write failed for '" + path + "'");
}

std::vector<std::string> write_curves(const EstimateReport& report, const std::string& dir) {
  // Group by (estimator, regime), keep t0 order.
  std::map<std::pair<std::string, std::string>, std::vector<const EstimateRecord*>> groups;
  for (const auto& r : report.estimates) {
    groups[{r.estimator, r.regime}].push_back(&r);
  }
  std::vector<std::string> written;
  for (auto& [key, rows] : groups) {
    std::sort(rows.begin(), rows.end(),
              [](const EstimateRecord* a, const EstimateRecord* b) { return a->t0 < b->t0; });
    const std::string path = dir + "/curve_" + key.first + "_" + key.second + ".csv";
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "t0,risk,lo,hi\n";
    out.precision(10);
    for (const auto* r : rows) {
      out << r->t0 << ',' << r->risk << ',' << r->lo << ',' << r->hi << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace longtmle
