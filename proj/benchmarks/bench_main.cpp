#include <benchmark/benchmark.h>

#include "oscar/endpoint.hpp"
#include "oscar/energy.hpp"
#include "oscar/flow.hpp"
#include "oscar/metrics.hpp"
#include "oscar/numerics.hpp"
#include "oscar/rng.hpp"
#include "oscar/sampler.hpp"
#include "oscar/verify.hpp"

namespace {

using namespace oscar;

Matrix random_features(std::size_t m, std::size_t d, std::uint64_t seed) {
  Matrix Z(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec row = rng::normal_vec(seed, rng::kMisc, 40 + i, 0, d);
    for (std::size_t j = 0; j < d; ++j) Z(i, j) = row[j];
  }
  return Z;
}

void BM_SetEnergy(benchmark::State& state) {
  const Matrix Z = random_features(static_cast<std::size_t>(state.range(0)), 8, 1);
  const EnergyConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(set_energy(Z, cfg));
}
BENCHMARK(BM_SetEnergy)->Arg(16)->Arg(64)->Arg(256);

void BM_EnergyGrad(benchmark::State& state) {
  const Matrix Z = random_features(static_cast<std::size_t>(state.range(0)), 8, 2);
  const EnergyConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(energy_grad(Z, cfg));
}
BENCHMARK(BM_EnergyGrad)->Arg(16)->Arg(64)->Arg(256);

void BM_SymEig(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix Z = random_features(n, n + 2, 3);
  const SymMatrix K = gram(Z);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(K));
}
BENCHMARK(BM_SymEig)->Arg(8)->Arg(32)->Arg(64);

void BM_GmmVelocity(benchmark::State& state) {
  const GmmSpec spec = verify_toy_gmm();
  const Vec x{9.0, 11.0};
  for (auto _ : state) benchmark::DoNotOptimize(gmm_velocity(spec, x, 0.5));
}
BENCHMARK(BM_GmmVelocity);

void BM_ControlledStep(benchmark::State& state) {
  const GmmSpec spec = verify_toy_gmm();
  const GmmField field(spec);
  SamplerConfig cfg = verify_toy_config();
  cfg.particles = static_cast<std::size_t>(state.range(0));
  const Encoder enc = make_encoder(cfg.encoder);
  for (auto _ : state) {
    state.PauseTiming();
    ParticleSet ps;
    ps.states = draw_init(cfg, field.dim());
    ps.t = 0.2;  // mid-gate so the control path is exercised
    ps.seed = cfg.seed;
    state.ResumeTiming();
    benchmark::DoNotOptimize(oscar_step(ps, field, enc, cfg, 20, 0.21));
  }
}
BENCHMARK(BM_ControlledStep)->Arg(16)->Arg(64);

void BM_BaselineStep(benchmark::State& state) {
  const GmmSpec spec = verify_toy_gmm();
  const GmmField field(spec);
  SamplerConfig cfg = verify_toy_config();
  cfg.particles = 64;
  const Encoder enc = make_encoder(cfg.encoder);
  for (auto _ : state) {
    state.PauseTiming();
    ParticleSet ps;
    ps.states = draw_init(cfg, field.dim());
    ps.t = 0.2;
    ps.seed = cfg.seed;
    state.ResumeTiming();
    benchmark::DoNotOptimize(baseline_step(ps, field, enc, cfg, 20, 0.21));
  }
}
BENCHMARK(BM_BaselineStep);

void BM_MetricBundle(benchmark::State& state) {
  const Matrix pts = random_features(64, 2, 7);
  const GmmSpec spec = verify_toy_gmm();
  const KernelSpec kernel;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        compute_metrics(pts, spec.means, Vec{2.0}, kernel, {3}, nullptr));
}
BENCHMARK(BM_MetricBundle);

}  // namespace

BENCHMARK_MAIN();
