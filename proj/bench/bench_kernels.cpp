/*
  Copyright 2026 The switchagg Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

// OpenMP kernels against their serial references. Run with
// OMP_NUM_THREADS set to compare scaling.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "switchagg/kernels.hpp"

namespace {

namespace k = switchagg::kernels;

std::vector<double> random_doubles(std::size_t n) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = d(rng);
    }
    return v;
}

std::vector<float> random_floats(std::size_t n) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<float> d(-70000.0f, 70000.0f);
    std::vector<float> v(n);
    for (auto& x : v) {
        x = d(rng);
    }
    return v;
}

template <bool Parallel>
void BM_Quantize(benchmark::State& state) {
    const auto x = random_doubles(static_cast<std::size_t>(state.range(0)));
    std::vector<std::int32_t> out(x.size());
    for (auto _ : state) {
        auto bad = Parallel ? k::quantize(x, 1e8, out) : k::reference::quantize(x, 1e8, out);
        benchmark::DoNotOptimize(bad);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Dequantize(benchmark::State& state) {
    std::vector<std::int32_t> q(static_cast<std::size_t>(state.range(0)), 12345);
    std::vector<double> out(q.size());
    for (auto _ : state) {
        if (Parallel) {
            k::dequantize(q, 1e8, out);
        } else {
            k::reference::dequantize(q, 1e8, out);
        }
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_RoundToHalf(benchmark::State& state) {
    const auto x = random_floats(static_cast<std::size_t>(state.range(0)));
    std::vector<float> out(x.size());
    for (auto _ : state) {
        auto over = Parallel ? k::round_to_half(x, out) : k::reference::round_to_half(x, out);
        benchmark::DoNotOptimize(over);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_MaxAbs(benchmark::State& state) {
    const auto x = random_doubles(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? k::max_abs(x) : k::reference::max_abs(x));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_AccumulateWrapping(benchmark::State& state) {
    std::vector<std::int32_t> acc(static_cast<std::size_t>(state.range(0)), 0);
    const std::vector<std::int32_t> add(acc.size(), 0x7654321);
    for (auto _ : state) {
        auto wraps = Parallel ? k::accumulate_wrapping(acc, add)
                              : k::reference::accumulate_wrapping(acc, add);
        benchmark::DoNotOptimize(wraps);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

constexpr std::int64_t kMin = 1 << 12;
constexpr std::int64_t kMax = 1 << 22;

}  // namespace

BENCHMARK(BM_Quantize<false>)->Name("quantize/reference")->Range(kMin, kMax);
BENCHMARK(BM_Quantize<true>)->Name("quantize/openmp")->Range(kMin, kMax);
BENCHMARK(BM_Dequantize<false>)->Name("dequantize/reference")->Range(kMin, kMax);
BENCHMARK(BM_Dequantize<true>)->Name("dequantize/openmp")->Range(kMin, kMax);
BENCHMARK(BM_RoundToHalf<false>)->Name("round_to_half/reference")->Range(kMin, kMax);
BENCHMARK(BM_RoundToHalf<true>)->Name("round_to_half/openmp")->Range(kMin, kMax);
BENCHMARK(BM_MaxAbs<false>)->Name("max_abs/reference")->Range(kMin, kMax);
BENCHMARK(BM_MaxAbs<true>)->Name("max_abs/openmp")->Range(kMin, kMax);
BENCHMARK(BM_AccumulateWrapping<false>)->Name("accumulate_wrapping/reference")->Range(kMin, kMax);
BENCHMARK(BM_AccumulateWrapping<true>)->Name("accumulate_wrapping/openmp")->Range(kMin, kMax);

BENCHMARK_MAIN();
