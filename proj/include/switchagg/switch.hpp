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
 * @file switch.hpp
 * @brief Switch dataplane state machine.
 *
 * The switch owns two pools of s slots (one per pool version). Each slot
 * holds k int32 partial sums, a contribution counter kept modulo n, and a
 * bitmap of workers whose contribution has been applied. A completed slot is
 * kept untouched as a shadow copy until the first contribution of the next
 * phase that uses the same version overwrites it.
 */

#ifndef SWITCHAGG_SWITCH_HPP_
#define SWITCHAGG_SWITCH_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "switchagg/wire.hpp"

namespace switchagg {

inline constexpr std::uint32_t kMaxWorkers = 64;

struct SwitchConfig {
    std::uint32_t workers = 1;
    std::uint32_t pool_size = 1;
    std::uint32_t chunk = kDefaultChunk;

    /// Throws Error(kInvalidConfig).
    void validate() const;
};

struct SwitchAction {
    enum class Kind { kDrop, kMulticast, kUnicast };

    Kind kind = Kind::kDrop;
    /// True when the packet's vector was added to a slot.
    bool applied = false;
    /// Result packet for kMulticast/kUnicast; header copied from the request.
    AggregationPacket packet;
    /// Destination worker for kUnicast.
    std::uint16_t dest = 0;
};

struct SlotView {
    std::uint32_t count = 0;
    std::vector<bool> seen;
    std::vector<std::int32_t> values;

    bool operator==(const SlotView&) const = default;
};

class AggregationSwitch {
  public:
    explicit AggregationSwitch(const SwitchConfig& cfg);

    /// Aggregation with duplicate suppression and shadow-copy replies.
    /// Throws Error(kSlotOutOfRange / kWorkerIdOutOfRange / kInvalidPacket).
    SwitchAction handle_packet(const AggregationPacket& p);

    /// Counter-only aggregation into version 0; assumes a loss-free channel.
    SwitchAction handle_packet_lossless(const AggregationPacket& p);

    SlotView slot_view(std::uint32_t ver, std::uint32_t idx) const;

    const SwitchConfig& config() const noexcept { return cfg_; }

    /// Number of element additions that wrapped around the int32 range.
    std::uint64_t overflow_events() const noexcept { return overflow_events_; }

    bool operator==(const AggregationSwitch& other) const {
        return cfg_.workers == other.cfg_.workers && cfg_.pool_size == other.cfg_.pool_size &&
               cfg_.chunk == other.cfg_.chunk && pool_ == other.pool_ &&
               count_ == other.count_ && seen_ == other.seen_;
    }

  private:
    std::size_t slot_index(std::uint32_t ver, std::uint32_t idx) const noexcept {
        return static_cast<std::size_t>(ver) * cfg_.pool_size + idx;
    }
    void check_packet(const AggregationPacket& p) const;
    void accumulate(std::size_t slot, const std::vector<std::int32_t>& v);
    void overwrite(std::size_t slot, const std::vector<std::int32_t>& v);
    std::vector<std::int32_t> read_slot(std::size_t slot) const;

    SwitchConfig cfg_;
    std::vector<std::int32_t> pool_;   // 2 * s * k
    std::vector<std::uint32_t> count_;  // 2 * s
    std::vector<std::uint64_t> seen_;   // 2 * s, bit w = worker w
    std::uint64_t overflow_events_ = 0;
};

}  // namespace switchagg

#endif  // SWITCHAGG_SWITCH_HPP_
