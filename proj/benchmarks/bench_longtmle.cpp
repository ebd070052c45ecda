#include <benchmark/benchmark.h>

#include <random>

#include "longtmle/coarsen.hpp"
#include "longtmle/learners.hpp"
#include "longtmle/oracle.hpp"
#include "longtmle/tmle.hpp"

namespace {

using namespace longtmle;

SummaryMap bench_map() {
  SummaryMap map;
  map.baseline = {"l0"};
  map.current = {"w"};
  map.lagged_treatment = true;
  return map;
}

// Synthetic regression problem with a few informative columns.
void make_problem(std::size_t n, Eigen::MatrixXd& x, Eigen::VectorXd& y,
                  Eigen::VectorXd& w) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  x.resize(static_cast<Eigen::Index>(n), 4);
  y.resize(static_cast<Eigen::Index>(n));
  w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng);
    const double p = expit(0.3 + 0.8 * x(i, 0) - 0.5 * x(i, 1));
    y(i) = unif(rng) < p ? 1.0 : 0.0;
  }
}

void BM_CoarsenDataset(benchmark::State& state) {
  const auto streams =
      simulate_daily(default_scenario(), static_cast<std::size_t>(state.range(0)), 7, 90);
  CoarsenConfig cfg;
  std::size_t rows = 0;
  for (auto _ : state) {
    LongDataset data = coarsen_dataset(streams, cfg);
    rows = data.n_rows();
    benchmark::DoNotOptimize(data);
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(rows));
}
BENCHMARK(BM_CoarsenDataset)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_LogisticFit(benchmark::State& state) {
  Eigen::MatrixXd x;
  Eigen::VectorXd y, w;
  make_problem(static_cast<std::size_t>(state.range(0)), x, y, w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_learner(LearnerSpec::logistic(), x, y, w));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_LogisticFit)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_GbtFit(benchmark::State& state) {
  Eigen::MatrixXd x;
  Eigen::VectorXd y, w;
  make_problem(static_cast<std::size_t>(state.range(0)), x, y, w);
  GbtParams params;
  params.n_trees = 50;
  params.max_depth = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_learner(LearnerSpec::boosted(params), x, y, w));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_GbtFit)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_FitG(benchmark::State& state) {
  const LongDataset data =
      simulate_interval(default_scenario(), static_cast<std::size_t>(state.range(0)), 3);
  const SummaryMap map = bench_map();
  GConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_g(data, map, config));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(data.n_rows()));
}
BENCHMARK(BM_FitG)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_TmleEstimate(benchmark::State& state) {
  const Dgp dgp = default_scenario();
  const LongDataset data =
      simulate_interval(dgp, static_cast<std::size_t>(state.range(0)), 5);
  const SummaryMap map = bench_map();
  const Regime regime = Regime::threshold(7.5, "w");
  const GModel g = fit_g(data, map, GConfig{});
  const auto paths = rule_paths(data, regime);
  const WeightTable weights = compute_weights(data, g, paths, WeightConfig{});
  QConfig q;
  q.design = QConfig::Design::saturated;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tmle_estimate(data, regime, paths, weights, map, dgp.horizon,
                                           TmleMode::stratified, q));
  }
}
BENCHMARK(BM_TmleEstimate)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
