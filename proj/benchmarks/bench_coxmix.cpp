#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "coxmix/cox_objective.hpp"
#include "coxmix/dcm_model.hpp"
#include "coxmix/metrics.hpp"
#include "coxmix/spline.hpp"
#include "coxmix/survival_estimators.hpp"
#include "coxmix/synth.hpp"

using namespace coxmix;

namespace {

SynthCohort cohort(std::size_t n) { return synthesize(synth_preset("crossing", n, 0.3, 1)); }

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return v;
}

}  // namespace

static void BM_PartialLikelihood(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto c = cohort(n);
    const auto times = c.dataset.times();
    const auto events = c.dataset.events();
    const auto f = noise(n, 2);
    for (auto _ : state) {
        auto ll = partial_log_likelihood(f, times, events);
        benchmark::DoNotOptimize(ll.value);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PartialLikelihood)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

static void BM_Breslow(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto c = cohort(n);
    const auto times = c.dataset.times();
    const auto events = c.dataset.events();
    const auto f = noise(n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(breslow(times, events, f));
}
BENCHMARK(BM_Breslow)->RangeMultiplier(4)->Range(256, 65536);

static void BM_ConcordanceTd(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto c = cohort(n);
    const auto times = c.dataset.times();
    const auto events = c.dataset.events();
    const auto g = censoring_km(times, events);
    const double probs[] = {0.75};
    const double h = event_quantiles(times, events, probs)[0];
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = true_survival(c.config, c.dataset[i].features, h);
    for (auto _ : state) benchmark::DoNotOptimize(concordance_td(s, times, events, g, h));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ConcordanceTd)->RangeMultiplier(4)->Range(256, 65536)->Complexity(benchmark::oNLogN);

static void BM_SplineEval(benchmark::State& state) {
    const auto c = cohort(4000);
    const auto times = c.dataset.times();
    const auto s = fit_spline(kaplan_meier(times, c.dataset.events()));
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(s.eval(times[i]));
        benchmark::DoNotOptimize(s.derivative(times[i]));
        i = (i + 1) % times.size();
    }
}
BENCHMARK(BM_SplineEval);

static void BM_FitEpoch(benchmark::State& state) {
    const auto c = cohort(static_cast<std::size_t>(state.range(0)));
    const auto ds = standardize(c.dataset).dataset;
    DcmConfig cfg;
    cfg.clusters = 3;
    cfg.hidden_layers = {50};
    cfg.max_epochs = 1;
    cfg.patience = 0;
    for (auto _ : state) benchmark::DoNotOptimize(fit(ds, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitEpoch)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
