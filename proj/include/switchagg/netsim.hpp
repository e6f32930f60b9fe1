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
 * @file netsim.hpp
 * @brief Deterministic discrete-event network of one switch and n workers.
 *
 * Every worker has an uplink and a downlink to the switch. A link serializes
 * frames at a fixed rate, then adds latency plus uniform jitter; delivery on
 * a single link stays in send order, so jitter reorders traffic only across
 * links. Loss, duplication and bit corruption are drawn per frame per link
 * from one seeded generator. Events at equal times run in insertion order.
 *
 * Frames travel as encoded bytes, so every delivery goes through the wire
 * codec and corrupted frames are discarded by the receiver.
 */

#ifndef SWITCHAGG_NETSIM_HPP_
#define SWITCHAGG_NETSIM_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "switchagg/metrics.hpp"
#include "switchagg/quant.hpp"
#include "switchagg/switch.hpp"
#include "switchagg/trace.hpp"
#include "switchagg/worker.hpp"

namespace switchagg {

struct ChannelConfig {
    /// Applied independently to every frame on every link direction.
    double loss_prob = 0.0;
    double dup_prob = 0.0;
    double corrupt_prob = 0.0;
    TimeNs latency_ns = 5'000;
    /// Uniform in [-jitter, +jitter], clamped so latency stays positive.
    TimeNs jitter_ns = 1'000;
    /// 0 disables serialization delay.
    double link_gbps = 10.0;
    /// Link, network and transport headers added to each frame on the wire;
    /// 37 bytes bring a 32-element frame to 180 bytes.
    std::uint32_t header_overhead_bytes = 37;

    void validate() const;
};

enum class LinkDirection : std::uint8_t { kUp, kDown };

/// Drops the nth frame on matching links. `worker` is the sending worker on
/// an uplink and the receiving worker on a downlink.
struct FaultDirective {
    LinkDirection direction = LinkDirection::kUp;
    std::optional<std::uint16_t> worker;
    std::optional<std::uint16_t> idx;
    std::optional<std::uint32_t> off;
    std::optional<std::uint8_t> ver;
    std::uint32_t nth = 1;
};

struct FaultScript {
    std::vector<FaultDirective> directives;
};

struct SimConfig {
    std::uint32_t workers = 2;
    std::uint32_t pool_size = 4;
    std::uint32_t chunk = kDefaultChunk;
    TimeNs timeout_ns = kDefaultTimeoutNs;
    std::optional<std::uint32_t> max_retries;
    ChannelConfig channel;
    std::uint64_t seed = 1;
    bool record_trace = true;
    TimeNs bin_ns = 10'000'000;
    /// A round that runs longer than this in simulated time is Stalled.
    TimeNs max_round_ns = 600'000'000'000;
    /// Slots the workers use; empty means [0, pool_size).
    std::vector<std::uint16_t> slots;
    /// Offset of this simulation's region inside the full tensor.
    std::uint32_t base_offset = 0;
    /// Per-worker delay before it starts sending each round; empty means
    /// every worker starts at once. TAT still counts from the round start.
    std::vector<TimeNs> start_offsets_ns;

    /// Throws Error(kInvalidConfig).
    void validate() const;
};

struct RoundOutcome {
    /// Per worker, the aggregated integers (un-padded).
    std::vector<std::vector<std::int32_t>> results;
    RunMetrics metrics;
};

/**
 * A persistent network: switch state, worker engines, link queues and the
 * clock survive across rounds, so successive rounds form one stream.
 */
class Simulation {
  public:
    explicit Simulation(SimConfig cfg, FaultScript faults = {});
    ~Simulation();
    Simulation(Simulation&&) noexcept;
    Simulation& operator=(Simulation&&) noexcept;

    /// Aggregates one quantized update per worker. All workers start at the
    /// current time. Throws Error(kConfigMismatch) on inconsistent inputs and
    /// Error(kStalled) if the round cannot finish.
    RoundOutcome run_round(std::span<const std::vector<std::int32_t>> updates);

    const SimTrace& trace() const noexcept;
    TimeNs now() const noexcept;
    const AggregationSwitch& switch_state() const noexcept;
    const WorkerEngine& worker(std::size_t w) const;
    const SimConfig& config() const noexcept;

    /// Times a worker started a slot phase while another worker had not yet
    /// started the previous phase of that slot.
    std::uint64_t phase_lag_violations() const noexcept;
    /// Largest number of packets any worker had in flight.
    std::size_t max_inflight() const noexcept;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SimulationResult {
    std::vector<std::vector<double>> results;
    SimTrace trace;
    RunMetrics metrics;
    std::uint64_t phase_lag_violations = 0;
    std::size_t max_inflight = 0;
};

/// Quantizes each worker's update with quant.scaling_factor, aggregates
/// through one simulated round and dequantizes every worker's result.
SimulationResult run_simulation(const SimConfig& cfg, std::span<const std::vector<double>> updates,
                                const QuantConfig& quant, const FaultScript& faults = {});

struct ReplayReport {
    SimTrace trace;
    bool identical = false;
    /// Index of the first differing event when not identical.
    std::size_t first_difference = 0;
};

/// Re-runs a simulation and compares the new trace with `recorded`.
ReplayReport replay(const SimTrace& recorded, const SimConfig& cfg,
                    std::span<const std::vector<double>> updates, const QuantConfig& quant,
                    const FaultScript& faults = {});

}  // namespace switchagg

#endif  // SWITCHAGG_NETSIM_HPP_
