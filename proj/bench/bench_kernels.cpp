#include "grotta/adaptation.hpp"
#include "grotta/kernels.hpp"
#include "grotta/output_adaptation.hpp"
#include "grotta/random.hpp"

#include <benchmark/benchmark.h>

using namespace grotta;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  RandomSource rng(seed);
  Matrix m(r, c);
  for (double &v : m.data())
    v = rng.uniform(-1.0, 1.0);
  return m;
}

template <Matrix (*Fn)(const Matrix &, const Matrix &)> void BM_Matmul(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}

template <Matrix (*Fn)(const Matrix &)> void BM_PairwiseDist(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix f = random_matrix(n, 32, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(f));
}

template <Matrix (*Fn)(const Matrix &, const Matrix &)> void BM_Solve(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, n, 4);
  for (std::size_t i = 0; i < n; ++i)
    a(i, i) += static_cast<double>(n);
  Matrix b = random_matrix(n, 16, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(Fn(a, b));
}

void BM_Refine(benchmark::State &state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  Matrix p = softmax_rows(random_matrix(b, 10, 6));
  Matrix f = random_matrix(b, 32, 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(refine(p, f, {}));
}

void BM_AdaptStep(benchmark::State &state) {
  RandomSource rng(8);
  Model source = Model::initialize({16, {32, 32}, 8}, rng);
  for (auto &block : source.blocks()) {
    block.norm.mu_s.assign(block.norm.channels(), 0.0);
    block.norm.sigma2_s.assign(block.norm.channels(), 1.0);
    init_global_from_source(block.norm);
  }
  AdaptSession session(source, AdaptConfig{}, 9);
  Matrix x = random_matrix(64, 16, 10);
  for (std::size_t i = 0; i < x.rows(); ++i)
    session.bank().insert(x.row(i), i % 8);
  for (auto _ : state)
    adapt_step(session, x);
}

} // namespace

BENCHMARK(BM_Matmul<grotta::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<grotta::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_PairwiseDist<grotta::serial::pairwise_sq_dist>)
    ->Name("pairwise_sq_dist/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_PairwiseDist<grotta::pairwise_sq_dist>)
    ->Name("pairwise_sq_dist/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_Solve<grotta::serial::solve_linear>)->Name("solve_linear/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Solve<grotta::solve_linear>)->Name("solve_linear/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Refine)->Arg(64)->Arg(256);
BENCHMARK(BM_AdaptStep);

BENCHMARK_MAIN();
