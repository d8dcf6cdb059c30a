// Serial reference vs OpenMP kernels at training and evaluation sizes.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "lsec/kernels.hpp"

using namespace lsec;

namespace {

DenseMatrix random_dense(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

// Row-normalized random adjacency with `deg` entries per row.
SparseMatrix random_adjacency(std::size_t rows, std::size_t cols, std::size_t deg,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(cols) - 1);
  SparseMatrix s;
  s.rows = rows;
  s.cols = cols;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::int32_t> nb;
    while (nb.size() < deg) {
      const auto c = pick(rng);
      if (std::find(nb.begin(), nb.end(), c) == nb.end()) nb.push_back(c);
    }
    std::sort(nb.begin(), nb.end());
    for (auto c : nb) {
      s.indices.push_back(c);
      s.values.push_back(1.0 / static_cast<double>(deg));
    }
    s.indptr.push_back(static_cast<std::int64_t>(s.indices.size()));
  }
  return s;
}

template <auto Kernel>
void BM_spmm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto s = random_adjacency(n, n, 16, 1);
  const auto d = random_dense(n, 64, 2);
  DenseMatrix out(n, 64);
  for (auto _ : st) {
    Kernel(s, d, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(s.nnz() * 64));
}

template <auto Kernel>
void BM_matmul(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_dense(n, 128, 3);
  const auto b = random_dense(128, 64, 4);
  DenseMatrix out(n, 64);
  for (auto _ : st) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * 128 * 64));
}

template <auto Kernel>
void BM_pair_scores(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto left = random_dense(n, 64, 5);
  const auto right = random_dense(1000, 64, 6);
  const auto bias = random_dense(1, 64, 7);
  const auto w2 = random_dense(1, 64, 8);
  DenseMatrix out(n, 1000);
  for (auto _ : st) {
    Kernel(left, right, bias.values(), w2.values(), 0.1, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * 1000));
}

}  // namespace

BENCHMARK(BM_spmm<kernels::serial::spmm>)->Name("spmm/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_spmm<kernels::parallel::spmm>)->Name("spmm/parallel")->Arg(2000)->Arg(20000);
BENCHMARK(BM_matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(1024)->Arg(8192);
BENCHMARK(BM_matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(1024)->Arg(8192);
BENCHMARK(BM_pair_scores<kernels::serial::pair_mlp_scores>)
    ->Name("pair_scores/serial")
    ->Arg(256)
    ->Arg(2000);
BENCHMARK(BM_pair_scores<kernels::parallel::pair_mlp_scores>)
    ->Name("pair_scores/parallel")
    ->Arg(256)
    ->Arg(2000);

BENCHMARK_MAIN();
