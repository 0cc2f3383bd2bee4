#include "provar/estimators.hpp"
#include "provar/ols.hpp"
#include "provar/prognostic.hpp"
#include "provar/rng.hpp"
#include "provar/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace provar;

namespace {

DesignMatrix gaussian_design(Eigen::Index n, Eigen::Index q, RngStream& rng) {
  DesignMatrix d;
  d.columns.resize(n, q);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) d.columns(i, j) = j == 0 ? 1.0 : rng.normal();
  d.layout.push_back({ColumnRole::intercept, 0});
  d.names.push_back("intercept");
  for (Eigen::Index j = 1; j < q; ++j) {
    d.layout.push_back({ColumnRole::covariate, static_cast<std::size_t>(j - 1)});
    d.names.push_back("z" + std::to_string(j));
  }
  return d;
}

void BM_FitOls(benchmark::State& state) {
  RngStream rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const DesignMatrix d = gaussian_design(n, 12, rng);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(fit_ols(d, y));
}
BENCHMARK(BM_FitOls)->Arg(500)->Arg(5000);

void BM_Sandwich(benchmark::State& state) {
  RngStream rng(2);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const DesignMatrix d = gaussian_design(n, 12, rng);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.normal();
  const OlsFit fit = fit_ols(d, y);
  for (auto _ : state) benchmark::DoNotOptimize(sandwich_covariance(d, y, fit));
}
BENCHMARK(BM_Sandwich)->Arg(500)->Arg(5000);

void BM_TrainForest(benchmark::State& state) {
  const ScenarioSpec spec = table1().front();
  RngStream rng(3);
  const HistoricalDataset hist = sample_historical(spec, static_cast<std::size_t>(state.range(0)), rng);
  ForestHyperparams params;
  params.n_trees = 20;
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(hist, params));
}
BENCHMARK(BM_TrainForest)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_ScoreTrial(benchmark::State& state) {
  const ScenarioSpec spec = table1().front();
  RngStream rng(4);
  ForestHyperparams params;
  params.n_trees = 200;
  const auto model = train_forest(sample_historical(spec, 5000, rng), params);
  const TrialDataset trial = sample_trial(spec, 500, 0.5, rng).trial;
  for (auto _ : state) benchmark::DoNotOptimize(score_trial(model, trial));
}
BENCHMARK(BM_ScoreTrial)->Unit(benchmark::kMillisecond);

void BM_PrognosticEstimate(benchmark::State& state) {
  const ScenarioSpec spec = table1().front();
  RngStream rng(5);
  const TrialDataset trial = sample_trial(spec, 500, 0.5, rng).trial;
  std::vector<double> scores(trial.size());
  for (auto& s : scores) s = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(estimate(EstimatorTag::prognostic, trial, scores));
}
BENCHMARK(BM_PrognosticEstimate);

}  // namespace
BENCHMARK_MAIN();
