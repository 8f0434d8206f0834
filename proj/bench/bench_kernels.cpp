// Parallel kernels against their serial references.

#include "pdiv/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace pdiv;

RowMatrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::vector<kernels::AnchoredTerm> random_terms(std::size_t n_points, std::size_t n_terms, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n_points - 1));
  std::uniform_int_distribution<int> sign(-1, 1);
  std::vector<kernels::AnchoredTerm> terms(n_terms);
  for (auto& t : terms) t = {pick(rng), pick(rng), pick(rng), sign(rng)};
  return terms;
}

template <bool Parallel>
void BM_AllPairDistances(benchmark::State& state) {
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 512, 1);
  for (auto _ : state) {
    auto d = Parallel ? kernels::all_pair_distances(pts) : kernels::reference::all_pair_distances(pts);
    benchmark::DoNotOptimize(d.data());
  }
}

template <bool Parallel>
void BM_HingeLoss(benchmark::State& state) {
  const std::size_t n = 3000;
  const auto inputs = random_points(n, 12, 2);
  const Matrix adapter = Matrix::Identity(12, 12);
  const auto terms = random_terms(n, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    auto r = Parallel ? kernels::hinge_loss(inputs, adapter, terms, 0.0, true)
                      : kernels::reference::hinge_loss(inputs, adapter, terms, 0.0, true);
    benchmark::DoNotOptimize(r.loss);
  }
}

template <bool Parallel>
void BM_AccumulateZscores(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto pts = random_points(n, 512, 4);
  std::vector<std::size_t> remaining(n - 1);
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i + 1;
  std::vector<double> running(remaining.size(), 0.0);
  for (auto _ : state) {
    if (Parallel)
      kernels::accumulate_zscores(pts, remaining, 0, 1.0, 0.5, running);
    else
      kernels::reference::accumulate_zscores(pts, remaining, 0, 1.0, 0.5, running);
    benchmark::DoNotOptimize(running.data());
  }
}

BENCHMARK_TEMPLATE(BM_AllPairDistances, true)->Arg(200)->Arg(800);
BENCHMARK_TEMPLATE(BM_AllPairDistances, false)->Arg(200)->Arg(800);
BENCHMARK_TEMPLATE(BM_HingeLoss, true)->Arg(3000);
BENCHMARK_TEMPLATE(BM_HingeLoss, false)->Arg(3000);
BENCHMARK_TEMPLATE(BM_AccumulateZscores, true)->Arg(1000)->Arg(10000);
BENCHMARK_TEMPLATE(BM_AccumulateZscores, false)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
