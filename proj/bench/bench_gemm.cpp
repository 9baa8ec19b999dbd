// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

// OpenMP photocore_gemm against the serial reference on square problems.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "pcsim/photocore.hpp"

namespace {

pcsim::Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  pcsim::Tensor t({rows, cols});
  for (float &v : t.data()) {
    v = u(rng);
  }
  return t;
}

template <bool Parallel> void BM_gemm(benchmark::State &state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const pcsim::Tensor w = random_matrix(size, size, 1);
  const pcsim::Tensor x = random_matrix(size, size, 2);
  pcsim::PhotocoreConfig cfg;
  cfg.n = 64;
  const pcsim::NoiseSource noise(3);
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(pcsim::photocore_gemm(w, x, cfg, noise));
    } else {
      benchmark::DoNotOptimize(pcsim::serial::photocore_gemm(w, x, cfg, noise));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size * size));
  state.counters["threads"] = Parallel ? omp_get_max_threads() : 1;
}

} // namespace

BENCHMARK(BM_gemm<false>)->Name("serial")->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gemm<true>)->Name("openmp")->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
