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
 * @file worker.hpp
 * @brief Worker-side streaming protocol engine.
 *
 * A worker splits its quantized update into k-element chunks, sends the first
 * window (one chunk per slot) and then reuses a slot only when the switch
 * returns that slot's result. Every slot has at most one packet in flight,
 * whose timer triggers a byte-identical retransmission.
 *
 * The engine is a stream: calling start_round() again after a round is done
 * continues the per-slot pool versions, so consecutive tensors share switch
 * state without a reset.
 */

#ifndef SWITCHAGG_WORKER_HPP_
#define SWITCHAGG_WORKER_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "switchagg/wire.hpp"

namespace switchagg {

/// Nanoseconds on the harness clock (simulated or steady_clock).
using TimeNs = std::int64_t;

inline constexpr TimeNs kDefaultTimeoutNs = 1'000'000;

struct WorkerConfig {
    std::uint16_t wid = 0;
    std::uint32_t workers = 1;
    std::uint32_t chunk = kDefaultChunk;
    /// Switch slot indices owned by this engine; window size = slots.size().
    std::vector<std::uint16_t> slots;
    TimeNs timeout_ns = kDefaultTimeoutNs;
    /// Unbounded when empty.
    std::optional<std::uint32_t> max_retries;
    /// Added to every packet offset (start of this engine's tensor region).
    std::uint32_t base_offset = 0;

    /// Engine over slots [0, pool_size).
    static WorkerConfig contiguous(std::uint16_t wid, std::uint32_t workers,
                                   std::uint32_t pool_size, std::uint32_t chunk = kDefaultChunk);

    std::uint32_t window() const noexcept { return static_cast<std::uint32_t>(slots.size()); }

    /// Throws Error(kInvalidConfig / kWorkerIdOutOfRange).
    void validate() const;
};

struct InflightRecord {
    std::uint16_t idx = 0;
    std::uint8_t ver = 0;
    std::uint32_t off = 0;
    /// Chunk number within the current round.
    std::size_t chunk = 0;
    /// Phases this slot has started over the engine lifetime, this one included.
    std::uint64_t phase = 0;
    TimeNs deadline = 0;
    std::uint32_t retries = 0;
};

class WorkerEngine {
  public:
    explicit WorkerEngine(WorkerConfig cfg);

    /// Begins aggregating `update`; returns the initial window.
    /// Throws Error(kEmptyUpdate), or Error(kInvalidConfig) if a round is active.
    std::vector<AggregationPacket> start_round(std::span<const std::int32_t> update,
                                               TimeNs now = 0);

    /// Consumes a result; returns the follow-up packet for the slot, if any.
    /// Results that match no in-flight packet are ignored and counted.
    std::vector<AggregationPacket> on_result(const AggregationPacket& p, TimeNs now = 0);

    /// Retransmits every overdue packet. Throws Error(kRetriesExhausted).
    std::vector<AggregationPacket> on_timeout(TimeNs now);

    /// Earliest armed timer, if any packet is in flight.
    std::optional<TimeNs> next_deadline() const;

    bool done() const noexcept { return done_; }
    bool active() const noexcept { return active_; }

    /// Aggregated integers, un-padded. Throws Error(kNotComplete).
    std::vector<std::int32_t> result() const;

    /// result() divided by the scaling factor. Throws Error(kNotComplete).
    std::vector<double> finalize(double scaling_factor) const;

    const WorkerConfig& config() const noexcept { return cfg_; }

    /// One entry per window position; empty optional when the slot is idle.
    const std::vector<std::optional<InflightRecord>>& inflight() const noexcept {
        return inflight_;
    }
    std::size_t inflight_count() const noexcept;

    /// Phases started per window position over the engine lifetime.
    const std::vector<std::uint64_t>& phases_started() const noexcept { return phases_; }

    std::uint64_t stale_results() const noexcept { return stale_results_; }
    std::uint64_t retransmissions() const noexcept { return retransmissions_; }

    /// Packet for the in-flight record at a window position, as last sent.
    AggregationPacket packet_for(std::size_t position) const;

  private:
    std::optional<std::size_t> position_of(std::uint16_t idx) const noexcept;
    AggregationPacket issue(std::size_t position, std::size_t chunk, TimeNs now);

    WorkerConfig cfg_;
    std::vector<std::int32_t> update_;  // padded to a multiple of k
    std::vector<std::int32_t> result_;
    std::vector<bool> filled_;
    std::size_t unpadded_ = 0;
    std::size_t chunks_ = 0;
    std::size_t filled_count_ = 0;
    bool active_ = false;
    bool done_ = false;

    std::vector<std::optional<InflightRecord>> inflight_;
    std::vector<std::uint8_t> next_ver_;
    std::vector<std::uint64_t> phases_;
    std::vector<std::int32_t> slot_lookup_;  // idx -> window position, -1 if foreign

    std::uint64_t stale_results_ = 0;
    std::uint64_t retransmissions_ = 0;
};

}  // namespace switchagg

#endif  // SWITCHAGG_WORKER_HPP_
