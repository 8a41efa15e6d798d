// Microbenchmarks for the hot paths: ensemble propagation, the serial
// adjustment update, kernel regression, clustering, and the Darcy solve.

#include <benchmark/benchmark.h>

#include "nlbu/darcy.hpp"
#include "nlbu/dynamics.hpp"
#include "nlbu/gaussian_update.hpp"
#include "nlbu/kde.hpp"
#include "nlbu/locality.hpp"
#include "nlbu/nonlinear_update.hpp"
#include "nlbu/rng.hpp"

namespace {

using namespace nlbu;

Ensemble l96_ensemble(int K) {
  Rng rng(1);
  MemberMatrix m(K, 40);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < 40; ++j) m(k, j) = 2.0 + rng.gaussian();
  std::vector<int> obs;
  for (int i = 1; i < 40; i += 2) obs.push_back(i);
  return Ensemble{m, StatePartition::from_observed(40, obs)};
}

void BM_PropagateL96(benchmark::State& state) {
  const auto model = lorenz96_model(8.0);
  auto ens = l96_ensemble(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ens = propagate_ensemble(model, ens, 0.1, 5);
    benchmark::DoNotOptimize(ens.members.data());
  }
}
BENCHMARK(BM_PropagateL96)->Arg(100)->Arg(1000);

void BM_EakfUpdateL96(benchmark::State& state) {
  const auto ens = l96_ensemble(static_cast<int>(state.range(0)));
  const int d2 = ens.partition.d2;
  const MeasurementModel meas{ens.partition, 1e-2 * Matrix::Identity(d2, d2),
                              Vector::Constant(d2, 2.0)};
  for (auto _ : state) {
    auto post = eakf_update(ens, meas, 1.05);
    benchmark::DoNotOptimize(post.members.data());
  }
}
BENCHMARK(BM_EakfUpdateL96)->Arg(100)->Arg(1000);

void BM_NlbuUpdateL96(benchmark::State& state) {
  const auto ens = l96_ensemble(1000);
  const int d2 = ens.partition.d2;
  const MeasurementModel meas{ens.partition, 1e-2 * Matrix::Identity(d2, d2),
                              Vector::Constant(d2, 2.0)};
  NlbuConfig cfg;
  cfg.radius = static_cast<double>(state.range(0));
  cfg.m_min = 40;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto out = nlbu_update(ens, meas, cfg, seed++);
    benchmark::DoNotOptimize(out.posterior.members.data());
  }
}
BENCHMARK(BM_NlbuUpdateL96)->Arg(5)->Arg(50);

void BM_NadarayaWatson(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  Rng rng(3);
  Matrix cu(M, 2), cv(M, 1);
  for (int i = 0; i < M; ++i) {
    cu(i, 0) = rng.gaussian();
    cu(i, 1) = rng.gaussian();
    cv(i, 0) = rng.gaussian();
  }
  const KdeModel model = KdeModel::fit(cu, cv);
  const Vector q = Vector::Constant(1, 0.2);
  for (auto _ : state) {
    auto out = nadaraya_watson(model, q);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_NadarayaWatson)->Arg(100)->Arg(1000);

void BM_SingleLinkage(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  Rng rng(5);
  Matrix samples(N, 2);
  for (int i = 0; i < N; ++i) {
    samples(i, 0) = rng.gaussian() + 5.0 * (i % 2);
    samples(i, 1) = rng.gaussian();
  }
  for (auto _ : state) {
    auto result = single_linkage_flat_clusters(samples, 0.8);
    benchmark::DoNotOptimize(result.labels.data());
  }
}
BENCHMARK(BM_SingleLinkage)->Arg(1000)->Arg(5000);

void BM_DarcySolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PermeabilityParams perm{1.5, 0.5};
  for (auto _ : state) {
    auto field = solve_pressure(perm, n);
    benchmark::DoNotOptimize(field.grid.data());
  }
}
BENCHMARK(BM_DarcySolve)->Arg(32)->Arg(64)->Arg(128);

void BM_DarcyForward(benchmark::State& state) {
  const Eigen::Vector2d u(1.5, 0.5);
  for (auto _ : state) {
    auto g = darcy_forward(u, 64);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_DarcyForward);

}  // namespace

BENCHMARK_MAIN();
