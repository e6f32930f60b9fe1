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

#include "switchagg/switch.hpp"

#include <algorithm>
#include <string>

#include "switchagg/error.hpp"

namespace switchagg {

void SwitchConfig::validate() const {
    if (workers == 0 || workers > kMaxWorkers) {
        throw Error(Errc::kInvalidConfig,
                    "worker count must be in [1, 64], got " + std::to_string(workers));
    }
    if (pool_size == 0 || pool_size > 65536) {
        throw Error(Errc::kInvalidConfig, "pool size must be in [1, 65536]");
    }
    if (chunk == 0) {
        throw Error(Errc::kInvalidConfig, "chunk must be positive");
    }
}

AggregationSwitch::AggregationSwitch(const SwitchConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    pool_.assign(2 * static_cast<std::size_t>(cfg_.pool_size) * cfg_.chunk, 0);
    count_.assign(2 * static_cast<std::size_t>(cfg_.pool_size), 0);
    seen_.assign(2 * static_cast<std::size_t>(cfg_.pool_size), 0);
}

void AggregationSwitch::check_packet(const AggregationPacket& p) const {
    if (p.idx >= cfg_.pool_size) {
        throw Error(Errc::kSlotOutOfRange, "slot " + std::to_string(p.idx));
    }
    if (p.wid >= cfg_.workers) {
        throw Error(Errc::kWorkerIdOutOfRange, "worker " + std::to_string(p.wid));
    }
    if (p.ver > 1) {
        throw Error(Errc::kInvalidPacket, "pool version must be 0 or 1");
    }
    if (p.vector.size() != cfg_.chunk) {
        throw Error(Errc::kInvalidPacket, "vector length does not match chunk size");
    }
}

void AggregationSwitch::accumulate(std::size_t slot, const std::vector<std::int32_t>& v) {
    std::int32_t* acc = pool_.data() + slot * cfg_.chunk;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::int32_t sum;
        if (__builtin_add_overflow(acc[i], v[i], &sum)) {
            ++overflow_events_;
        }
        acc[i] = sum;  // GCC/Clang store the wrapped result
    }
}

void AggregationSwitch::overwrite(std::size_t slot, const std::vector<std::int32_t>& v) {
    std::copy(v.begin(), v.end(), pool_.begin() + static_cast<std::ptrdiff_t>(slot * cfg_.chunk));
}

std::vector<std::int32_t> AggregationSwitch::read_slot(std::size_t slot) const {
    const auto first = pool_.begin() + static_cast<std::ptrdiff_t>(slot * cfg_.chunk);
    return {first, first + cfg_.chunk};
}

SwitchAction AggregationSwitch::handle_packet(const AggregationPacket& p) {
    check_packet(p);
    const std::size_t slot = slot_index(p.ver, p.idx);
    const std::size_t shadow = slot_index(p.ver ^ 1U, p.idx);
    const std::uint64_t bit = std::uint64_t{1} << p.wid;

    SwitchAction action;
    if ((seen_[slot] & bit) == 0) {
        action.applied = true;
        seen_[slot] |= bit;
        seen_[shadow] &= ~bit;
        // The first contribution of a phase overwrites the shadow copy left by
        // the phase two steps back. Testing the old counter keeps this right
        // for n == 1, where (count + 1) % n never equals 1.
        const bool first = count_[slot] == 0;
        count_[slot] = (count_[slot] + 1) % cfg_.workers;
        if (first) {
            overwrite(slot, p.vector);
        } else {
            accumulate(slot, p.vector);
        }
        if (count_[slot] == 0) {
            action.kind = SwitchAction::Kind::kMulticast;
            action.packet = p;
            action.packet.vector = read_slot(slot);
        }
    } else if (count_[slot] == 0) {
        action.kind = SwitchAction::Kind::kUnicast;
        action.packet = p;
        action.packet.vector = read_slot(slot);
        action.dest = p.wid;
    }
    return action;
}

SwitchAction AggregationSwitch::handle_packet_lossless(const AggregationPacket& p) {
    check_packet(p);
    const std::size_t slot = slot_index(0, p.idx);
    accumulate(slot, p.vector);
    SwitchAction action;
    action.applied = true;
    if (++count_[slot] == cfg_.workers) {
        action.kind = SwitchAction::Kind::kMulticast;
        action.packet = p;
        action.packet.vector = read_slot(slot);
        std::fill_n(pool_.begin() + static_cast<std::ptrdiff_t>(slot * cfg_.chunk), cfg_.chunk, 0);
        count_[slot] = 0;
    }
    return action;
}

SlotView AggregationSwitch::slot_view(std::uint32_t ver, std::uint32_t idx) const {
    if (ver > 1 || idx >= cfg_.pool_size) {
        throw Error(Errc::kSlotOutOfRange,
                    "slot (" + std::to_string(ver) + ", " + std::to_string(idx) + ")");
    }
    const std::size_t slot = slot_index(ver, idx);
    SlotView view;
    view.count = count_[slot];
    view.seen.resize(cfg_.workers);
    for (std::uint32_t w = 0; w < cfg_.workers; ++w) {
        view.seen[w] = ((seen_[slot] >> w) & 1U) != 0;
    }
    view.values = read_slot(slot);
    return view;
}

}  // namespace switchagg
