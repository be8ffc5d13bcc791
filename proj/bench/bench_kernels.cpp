// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP versions, and the benchmark
// matrix on one thread against all threads.
#include <benchmark/benchmark.h>

#include "optm/numerics.hpp"
#include "optm/protocol.hpp"

using namespace optm;

namespace {

Mat random_mat(std::size_t rows, std::size_t cols) {
  Rng rng(1);
  Mat m(rows, cols);
  for (auto& x : m.flat()) x = rng.normal(0, 1);
  return m;
}

Vec random_vec(std::size_t n) {
  Rng rng(2);
  Vec v(n);
  for (auto& x : v) x = rng.normal(0, 1);
  return v;
}

void BM_matvec_serial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Mat m = random_mat(n, n);
  const Vec v = random_vec(n);
  for (auto _ : st) benchmark::DoNotOptimize(serial::matvec(m, v));
  st.SetItemsProcessed(st.iterations() * static_cast<long long>(n * n));
}

void BM_matvec_parallel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Mat m = random_mat(n, n);
  const Vec v = random_vec(n);
  for (auto _ : st) benchmark::DoNotOptimize(matvec(m, v));
  st.SetItemsProcessed(st.iterations() * static_cast<long long>(n * n));
}

void BM_outer_serial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Mat acc(n, n);
  const Vec a = random_vec(n), b = random_vec(n);
  for (auto _ : st) {
    serial::outer_acc(acc, a, b);
    benchmark::ClobberMemory();
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long long>(n * n));
}

void BM_outer_parallel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Mat acc(n, n);
  const Vec a = random_vec(n), b = random_vec(n);
  for (auto _ : st) {
    outer_acc(acc, a, b);
    benchmark::ClobberMemory();
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long long>(n * n));
}

void BM_matrix(benchmark::State& st) {
  SyntheticConfig sc;
  sc.events = 1500;
  sc.regime = SyntheticRegime::trend;
  const auto stream = generate_synthetic(sc);
  ProtocolConfig pc;
  pc.train_sizes = {500, 1000};
  pc.base.test_len = 400;
  pc.jobs = static_cast<int>(st.range(0));
  std::vector<ModelSpec> specs(3);
  specs[0].kind = ModelKind::optm_lstm;
  specs[1].kind = ModelKind::lstm;
  specs[2].kind = ModelKind::gru;
  for (auto _ : st) benchmark::DoNotOptimize(benchmark_matrix(pc, specs, stream));
}

}  // namespace

BENCHMARK(BM_matvec_serial)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_matvec_parallel)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_outer_serial)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_outer_parallel)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_matrix)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
