#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "longtmle/oracle.hpp"
#include "longtmle/propensity.hpp"

using namespace longtmle;
using namespace longtmle::testing;

namespace {

// Fixed action probabilities, independent of history.
class ConstantG : public GProvider {
 public:
  ConstantG(double treat, double uncens) : treat_(treat), uncens_(uncens) {}
  double treat_prob(const LongDataset&, std::size_t, int) const override { return treat_; }
  double uncensored_prob(const LongDataset&, std::size_t, int, int) const override {
    return uncens_;
  }

 private:
  double treat_;
  double uncens_;
};

LongDataset all_treated(int n_rows) {
  std::vector<RowSpec> rows;
  for (int k = 0; k < n_rows; ++k) rows.push_back({{7.0}, 1, CensorCause::none, 0});
  return make_dataset({"w"}, {make_subject("s", rows)});
}

}  // namespace

TEST_CASE("mechanism design row layout") {
  LongDataset data = make_dataset(
      {"l0", "w"},
      {make_subject("s", {{{1.0, 7.0}, 0, CensorCause::none, 0},
                          {{1.0, 6.5}, 1, CensorCause::none, 0},
                          {{1.0, 8.0}, 1, CensorCause::none, 0},
                          {{1.0, 8.2}, 1, CensorCause::none, 0},
                          {{1.0, 8.4}, 1, CensorCause::none, 0},
                          {{1.0, 8.6}, 1, CensorCause::none, 0}})});
  SummaryMap map;
  map.baseline = {"l0"};
  map.current = {"w"};
  map.lagged_treatment = true;

  MechanismDesign d;
  d.summary = ResolvedSummary(data, map);
  d.summary_dim = map.dimension();
  d.time_term = true;
  d.coarse_bin = 2;
  d.n_bins = 3;
  d.treat_column = true;
  REQUIRE(d.dimension() == 3 + 1 + 2 + 1);

  std::vector<double> row(d.dimension());
  d.fill(data.subjects[0], 5, 1, row.data());
  CHECK(row[0] == 1.0);   // baseline l0
  CHECK(row[1] == 8.6);   // current w
  CHECK(row[2] == 1.0);   // lagged treatment
  CHECK(row[3] == 5.0);   // linear time
  CHECK(row[4] == 0.0);   // bin 1 indicator (k / 2 = 2)
  CHECK(row[5] == 1.0);   // bin 2 indicator
  CHECK(row[6] == 1.0);   // same-interval treatment

  d.fill(data.subjects[0], 0, 0, row.data());
  CHECK(row[1] == 7.0);
  CHECK(row[2] == 0.0);
  CHECK(row[3] == 0.0);
  CHECK(row[4] == 0.0);
  CHECK(row[5] == 0.0);
  CHECK(row[6] == 0.0);
}

TEST_CASE("fitted mechanism tracks the data-generating one") {
  const Dgp dgp = default_scenario();
  LongDataset data = simulate_interval(dgp, 4000, 31);
  GConfig config;
  GModel g = fit_g(data, SummaryMap::default_map(data), config);
  TrueG truth(dgp, data);

  CHECK_FALSE(g.init.degenerate);
  CHECK_FALSE(g.cont.degenerate);
  CHECK_FALSE(g.dis.degenerate);
  CHECK_FALSE(g.death.degenerate);
  CHECK(g.admin_rate == doctest::Approx(dgp.admin_hazard).epsilon(0.35));

  double treat_err = 0.0, uncens_err = 0.0;
  std::size_t n_rows = 0;
  for (std::size_t i = 0; i < data.n_subjects(); ++i) {
    const auto& subj = data.subjects[i];
    for (int k = 0; k <= subj.last_t(); ++k) {
      const int a = subj.rows[static_cast<std::size_t>(k)].a_treat;
      treat_err += std::abs(g.treat_prob(data, i, k) - truth.treat_prob(data, i, k));
      uncens_err +=
          std::abs(g.uncensored_prob(data, i, k, a) - truth.uncensored_prob(data, i, k, a));
      ++n_rows;
    }
  }
  CHECK(treat_err / static_cast<double>(n_rows) < 0.03);
  CHECK(uncens_err / static_cast<double>(n_rows) < 0.02);
}

TEST_CASE("degenerate strata collapse to clamped constants") {
  // Nobody ever treated: the continuation stratum is empty and the initiation
  // response is constant zero.
  LongDataset data = make_dataset(
      {"w"}, {make_subject("a", {{{7.0}, 0, CensorCause::none, 0},
                                 {{7.5}, 0, CensorCause::none, 0}}),
              make_subject("b", {{{6.0}, 0, CensorCause::none, 1}})});
  GConfig config;
  config.p_min = 0.01;
  GModel g = fit_g(data, SummaryMap::default_map(data), config);

  CHECK(g.cont.degenerate);
  CHECK(g.cont.selected_label == "degenerate(empty)");
  CHECK(g.cont.constant == 0.01);
  CHECK(g.cont.n_rows == 0);

  CHECK(g.init.degenerate);
  CHECK(g.init.selected_label == "degenerate(constant)");
  CHECK(g.init.constant == 0.01);

  // No censoring events at all.
  CHECK(g.dis.degenerate);
  CHECK(g.dis.constant == 0.01);
  CHECK(g.admin_rate == 0.01);

  CHECK(g.treat_prob(data, 0, 0) == 0.01);
  CHECK(g.uncensored_prob(data, 0, 0, 0) ==
        doctest::Approx(0.99 * 0.99 * 0.99).epsilon(1e-12));
}

TEST_CASE("fit_g input validation") {
  LongDataset empty;
  empty.covariate_names = {"w"};
  GConfig config;
  CHECK_THROWS_AS(fit_g(empty, SummaryMap{}, config), ConfigError);

  const Dgp dgp = discrete_world();
  LongDataset data = simulate_interval(dgp, 50, 1);
  GConfig dsl_config;
  dsl_config.strategy = Strategy::dsl;
  CHECK_THROWS_AS(fit_g(data, SummaryMap::default_map(data), dsl_config), ConfigError);
}

TEST_CASE("refit_g reuses the selected specs without reselecting") {
  const Dgp dgp = default_scenario();
  LongDataset data = simulate_interval(dgp, 400, 5);
  GConfig config;
  config.strategy = Strategy::dsl;
  config.candidates = {LearnerSpec::logistic(), LearnerSpec::ridge(1.0)};
  config.cv.v_folds = 4;
  GModel g = fit_g(data, SummaryMap::default_map(data), config);
  CHECK_FALSE(g.init.cv_risks.empty());

  LongDataset fresh = simulate_interval(dgp, 400, 6);
  GModel re = refit_g(fresh, g);
  CHECK(re.init.cv_risks.empty());
  CHECK(re.init.selected_label == g.init.selected_label);
  CHECK(re.cont.selected_label == g.cont.selected_label);
  CHECK(re.dis.selected_label == g.dis.selected_label);
  CHECK(re.death.selected_label == g.death.selected_label);
}

TEST_CASE("cumulative weights multiply inverse action probabilities") {
  LongDataset data = all_treated(3);
  Regime regime = Regime::always_treat("w");
  auto paths = rule_paths(data, regime);
  ConstantG g(0.25, 0.8);  // each interval contributes 1 / 0.2 = 5

  WeightConfig config;
  config.truncation = 30.0;
  WeightTable table = compute_weights(data, g, paths, config);

  CHECK(table.raw_weight(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(table.raw_weight(0, 1) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(table.raw_weight(0, 2) == doctest::Approx(125.0).epsilon(1e-12));
  CHECK(table.weight(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(table.weight(0, 1) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(table.weight(0, 2) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(table.truncated_count() == 1);
  CHECK(table.max_k(0) == 2);
  CHECK(table.weight(0, 3) == 0.0);
  CHECK(table.weight(0, -1) == 0.0);
}

TEST_CASE("weights vanish from the first deviation or censoring") {
  LongDataset data = make_dataset(
      {"w"},
      {make_subject("dev", {{{7.0}, 1, CensorCause::none, 0},
                            {{7.0}, 0, CensorCause::none, 0},
                            {{7.0}, 1, CensorCause::none, 0}}),
       make_subject("cens", {{{7.0}, 1, CensorCause::none, 0},
                             {{7.0}, 1, CensorCause::disenroll, 0}})});
  Regime regime = Regime::always_treat("w");
  auto paths = rule_paths(data, regime);
  ConstantG g(0.5, 1.0);
  WeightTable table = compute_weights(data, g, paths, WeightConfig{});

  CHECK(table.weight(0, 0) == 2.0);
  CHECK(table.weight(0, 1) == 0.0);
  CHECK(table.weight(0, 2) == 0.0);  // stays zero after the deviation
  CHECK(table.weight(1, 0) == 2.0);
  CHECK(table.weight(1, 1) == 0.0);
}

TEST_CASE("stabilized weights divide by numerator probabilities") {
  LongDataset data = all_treated(2);
  Regime regime = Regime::always_treat("w");
  auto paths = rule_paths(data, regime);
  ConstantG denom(0.2, 1.0);
  ConstantG numer(0.5, 1.0);

  WeightConfig config;
  config.stabilize = true;
  config.stabilized_truncation = 5.0;
  WeightTable table = compute_weights(data, denom, paths, config, &numer);

  CHECK(table.raw_weight(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(table.raw_weight(0, 1) == doctest::Approx(6.25).epsilon(1e-12));
  CHECK(table.weight(0, 1) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(table.truncated_count() == 1);

  CHECK_THROWS_AS(compute_weights(data, denom, paths, config, nullptr), ConfigError);
  std::vector<RulePath> wrong;
  CHECK_THROWS_AS(compute_weights(data, denom, wrong, WeightConfig{}), ConfigError);
}

TEST_CASE("weight summaries pool per interval") {
  LongDataset data = make_dataset(
      {"w"},
      {make_subject("a", {{{7.0}, 1, CensorCause::none, 0},
                          {{7.0}, 1, CensorCause::none, 0}}),
       make_subject("b", {{{7.0}, 0, CensorCause::none, 0}}),
       make_subject("c", {{{7.0}, 1, CensorCause::none, 1}})});
  Regime regime = Regime::always_treat("w");
  auto paths = rule_paths(data, regime);
  ConstantG g(0.5, 1.0);
  WeightTable table = compute_weights(data, g, paths, WeightConfig{});

  auto s = table.summaries();
  REQUIRE(s.size() == 2);
  CHECK(s[0].k == 0);
  CHECK(s[0].n_rows == 3);
  CHECK(s[0].n_positive == 2);  // subject b deviates at k = 0
  CHECK(s[0].mean == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(s[0].min == 2.0);
  CHECK(s[0].max == 2.0);
  CHECK(s[1].n_rows == 1);
  CHECK(s[1].n_positive == 1);
  CHECK(s[1].mean == 4.0);
  CHECK(s[1].median == 4.0);
}

TEST_CASE("ground-truth weights average one at entry") {
  const Dgp dgp = discrete_world();  // no censoring, coin-flip treatment
  LongDataset data = simulate_interval(dgp, 2000, 17);
  TrueG g(dgp, data);
  Regime regime = Regime::threshold(7.5, "w");
  auto paths = rule_paths(data, regime);
  WeightConfig config;
  config.truncation.reset();
  WeightTable table = compute_weights(data, g, paths, config);

  double total = 0.0;
  for (std::size_t i = 0; i < data.n_subjects(); ++i) total += table.weight(i, 0);
  const double mean_w = total / static_cast<double>(data.n_subjects());
  CHECK(mean_w == doctest::Approx(1.0).epsilon(0.1));
}
