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

/**
 * @file bench.hpp
 * @brief Experiments run on the simulator: tensor aggregation time under
 * loss, send timelines, communication cost and a small training run.
 */

#ifndef SWITCHAGG_BENCH_HPP_
#define SWITCHAGG_BENCH_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "switchagg/metrics.hpp"
#include "switchagg/netsim.hpp"

namespace switchagg {

struct MicrobenchConfig {
    std::uint32_t workers = 8;
    std::uint32_t pool_size = 128;
    std::uint32_t chunk = kDefaultChunk;
    std::uint64_t tensor_bytes = 1 << 20;
    double loss_prob = 0.0;
    double dup_prob = 0.0;
    std::uint64_t seed = 1;
    std::uint32_t repeats = 5;
    TimeNs timeout_ns = kDefaultTimeoutNs;
    ChannelConfig channel;  // loss/dup above override the channel's
};

struct MicrobenchResult {
    std::vector<RunMetrics> runs;
    double median_tat_ns = 0.0;
    double median_ate_per_sec = 0.0;
    std::uint64_t retransmissions = 0;
    /// Every output element of every run equalled n.
    bool verified = true;
};

/// Aggregates `repeats` all-ones tensors back to back over one simulated
/// network (f = 1, so every aggregated element must equal n).
MicrobenchResult run_microbenchmark(const MicrobenchConfig& cfg);

/// One CSV row per run plus header.
std::string microbench_csv(const MicrobenchConfig& cfg, const MicrobenchResult& r);

enum class CommStrategy { kRingAllReduce, kInNetwork, kDedicatedPs };

std::optional<CommStrategy> parse_strategy(std::string_view name);
const char* to_string(CommStrategy s) noexcept;

/// Bytes sent plus received per worker to all-reduce an update of
/// `update_bytes`. Throws Error(kInvalidConfig) if workers < 2.
double comm_cost(CommStrategy strategy, std::uint32_t workers, double update_bytes);

struct Timeline {
    std::int64_t bin_ns = 10'000'000;
    /// bins[w][b]; all rows padded to the same length.
    std::vector<std::vector<std::uint64_t>> bins;
    std::uint64_t total_sends = 0;
    RunMetrics metrics;

    /// Columns: bin, start_ms, w0..w{n-1}, total.
    std::string to_csv() const;
};

struct TimelineConfig {
    std::uint32_t workers = 8;
    std::uint32_t pool_size = 128;
    std::uint32_t chunk = kDefaultChunk;
    std::uint64_t tensor_bytes = 16 << 20;
    double loss_prob = 0.0;
    std::uint64_t seed = 1;
    TimeNs timeout_ns = kDefaultTimeoutNs;
};

/// One all-ones aggregation with sends binned into 10 ms windows.
Timeline loss_timeline(const TimelineConfig& cfg);

struct TrainConfig {
    std::uint32_t workers = 4;
    std::uint32_t epochs = 20;
    std::uint64_t seed = 1;
    bool quantize = true;
    std::uint32_t samples = 512;
    std::uint32_t features = 16;
    double learning_rate = 0.5;
    /// Multiplies the overflow-safe scaling factor.
    double scaling_multiplier = 1.0;
    std::uint32_t pool_size = 8;
    std::uint32_t chunk = 4;
    double loss_prob = 0.0;
};

struct TrainResult {
    /// Mean log-loss over the full dataset before each epoch and after the
    /// last: epochs + 1 entries.
    std::vector<double> loss;
    std::vector<double> weights;
    double scaling_factor = 0.0;
    bool diverged = false;
    bool stalled = false;
};

/// True when the loss rose on `streak` consecutive epochs somewhere in the curve.
bool loss_diverged(std::span<const double> loss, std::size_t streak = 5);

/// Full-batch synchronous SGD on logistic regression. Each worker computes
/// the update -lr * grad on its shard; updates are averaged either through
/// the simulated protocol with quantization or exactly in floating point.
TrainResult mini_train(const TrainConfig& cfg);

}  // namespace switchagg

#endif  // SWITCHAGG_BENCH_HPP_
