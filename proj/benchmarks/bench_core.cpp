#include <benchmark/benchmark.h>

#include "isacwave/detect.hpp"
#include "isacwave/estimate.hpp"
#include "isacwave/unfold.hpp"

using namespace isacwave;

namespace {

struct Fixture {
  SceneConfig cfg;
  ChannelSet ch;
  SymbolFrame frame;
  CVec x, phi;

  explicit Fixture(int n_ris) {
    cfg = SceneConfig::desk();
    cfg.N = n_ris;
    cfg.seed = 7;
    Rng rng(cfg.seed);
    ch = synth_channels(cfg, rng);
    frame = draw_symbols(cfg, rng);
    std::tie(x, phi) = default_init(ch, cfg);
  }
};

void bm_sinr_gradient(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(f1_grad(f.x, f.phi, f.ch, f.cfg));
  }
}

void bm_crb_gradient(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const Complex alpha0 = nominal_alpha0(f.cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(f2_grad(f.x, f.phi, f.ch, f.cfg, alpha0));
  }
}

void bm_clutter_covariance(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const CascadeOps ops = build_cascade(f.ch, f.phi, f.cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(clutter_covariance(ops, f.x, f.cfg));
  }
}

void bm_solver_layer(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const StepSchedule sched = hand_tuned_schedule(Task::detect, f.cfg, f.ch, f.frame, 1, 2, 3);
  UnfoldOptions opts;
  opts.rho = hand_tuned_rho(Task::detect, f.cfg, f.ch, f.frame);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_unfolded(Task::detect, f.cfg, f.ch, f.frame, sched, f.x, f.phi, opts));
  }
}

void bm_ci_margin(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ci_margin(f.x, f.phi, f.frame, f.ch, f.cfg));
  }
}

}  // namespace

BENCHMARK(bm_sinr_gradient)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(bm_crb_gradient)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(bm_clutter_covariance)->Arg(16);
BENCHMARK(bm_ci_margin)->Arg(16);
BENCHMARK(bm_solver_layer)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
