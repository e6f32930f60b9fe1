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
 * @file collective.hpp
 * @brief Synchronous all-reduce over a stream of tensors.
 *
 * Tensors are reduced in submission order as one continuous stream: switch
 * slots and pool versions carry over from one tensor to the next. A tensor
 * can be split into c contiguous shards, each driven by its own protocol
 * engine over a disjoint set of slots ({idx : idx mod c == j}).
 */

#ifndef SWITCHAGG_COLLECTIVE_HPP_
#define SWITCHAGG_COLLECTIVE_HPP_

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "switchagg/metrics.hpp"
#include "switchagg/netsim.hpp"
#include "switchagg/transport.hpp"

namespace switchagg {

struct Tensor {
    std::uint64_t id = 0;
    std::vector<double> values;
};

struct TensorJob {
    std::vector<Tensor> tensors;
};

struct ShardRegion {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<std::uint16_t> slots;

    std::size_t size() const noexcept { return end - begin; }
    bool empty() const noexcept { return begin == end; }
};

struct ShardPlan {
    std::vector<ShardRegion> shards;
};

/// Splits [0, len) into `shards` contiguous regions on k-element boundaries
/// whose chunk counts differ by at most one; shard j gets slots idx < s with
/// idx % shards == j. Throws Error(kInvalidConfig).
ShardPlan shard_tensor(std::size_t len, std::size_t shards, std::size_t k, std::size_t s);

/// Smallest power of two >= ceil(bdp_bytes / frame_bytes).
/// Throws Error(kInvalidConfig) unless both are positive.
std::uint32_t tune_pool_size(double bdp_bytes, double frame_bytes);

enum class Reduction { kSum, kAverage };

struct CollectiveConfig {
    std::uint32_t workers = 2;
    std::uint32_t pool_size = 4;
    std::uint32_t chunk = kDefaultChunk;
    std::uint32_t shards = 1;
    double scaling_factor = 1.0;
    Reduction reduction = Reduction::kAverage;
    TimeNs timeout_ns = kDefaultTimeoutNs;
    std::optional<std::uint32_t> max_retries;
    ChannelConfig channel;
    std::uint64_t seed = 1;
    bool record_trace = false;
};

struct TensorReport {
    std::uint64_t id = 0;
    /// Counters summed over shards; timings are the slowest shard.
    RunMetrics metrics;
    /// Update packets (excluding retransmissions) sent by each worker.
    std::uint64_t packets_per_worker = 0;
};

/**
 * All-reduce driven over simulated networks, one per shard. Shards of a
 * tensor run concurrently (OpenMP); each shard's network is single-threaded
 * and deterministic, so results do not depend on the thread count.
 */
class SimulatedCollective {
  public:
    explicit SimulatedCollective(CollectiveConfig cfg);

    /// inputs[w] is worker w's instance of the next tensor. Returns each
    /// worker's reduced tensor. Throws Error(kOrderMismatch) when ids differ,
    /// Error(kStalled), Error(kOverflow).
    std::vector<std::vector<double>> all_reduce(std::span<const Tensor> inputs);

    /// jobs[w] is worker w's job; tensors are reduced in order.
    /// Returns results[w][t].
    std::vector<std::vector<std::vector<double>>> run_job(std::span<const TensorJob> jobs);

    const std::vector<TensorReport>& reports() const noexcept { return reports_; }
    const CollectiveConfig& config() const noexcept { return cfg_; }
    std::uint64_t phase_lag_violations() const noexcept;
    /// Trace of one shard's network (empty unless record_trace).
    const SimTrace& shard_trace(std::size_t shard) const { return shards_.at(shard).trace(); }

  private:
    CollectiveConfig cfg_;
    std::vector<Simulation> shards_;
    std::vector<TensorReport> reports_;
};

/**
 * All-reduce over the datagram transport for one worker process. Calls from
 * several threads are serialized; every process must submit the same tensor
 * ids in the same order.
 */
class UdpCollective {
  public:
    explicit UdpCollective(UdpWorkerConfig cfg, Reduction reduction = Reduction::kAverage);

    /// Join handshake with the switch (agrees on n, s, k and f).
    void register_worker();
    std::vector<double> all_reduce(const Tensor& tensor);
    void shutdown();

  private:
    std::mutex mu_;
    UdpWorker worker_;
    Reduction reduction_;
    bool registered_ = false;
    bool closed_ = false;
};

}  // namespace switchagg

#endif  // SWITCHAGG_COLLECTIVE_HPP_
