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
 * @file trace.hpp
 * @brief Event log of a simulated run, exportable as JSON lines.
 *
 * One JSON object per line, keys in this order:
 *   {"t":<ns>,"ev":<kind>,"at":<endpoint>,"wid":..,"ver":..,"idx":..,"off":..}
 * `at` is "switch", "w<i>" for a worker, or "up:w<i>" / "down:w<i>" for the
 * link between worker i and the switch.
 */

#ifndef SWITCHAGG_TRACE_HPP_
#define SWITCHAGG_TRACE_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace switchagg {

enum class TraceKind : std::uint8_t {
    kSend,       // worker put an update on its uplink (first send or retransmission)
    kDeliver,    // frame arrived at an endpoint
    kDrop,       // frame lost on a link
    kDup,        // link duplicated a frame
    kCorrupt,    // link flipped a bit in a frame
    kReject,     // endpoint discarded an undecodable frame
    kTimeout,    // worker timer expired for an in-flight packet
    kAggregate,  // switch applied a contribution without completing the slot
    kIgnore,     // switch dropped a duplicate contribution
    kMulticast,  // switch completed a slot and sent the result to every worker
    kUnicast,    // switch re-sent a completed result to one worker
    kStale,      // worker ignored a result matching nothing in flight
    kDone,       // worker assembled its whole aggregate
};

std::string_view to_string(TraceKind kind) noexcept;

enum class TraceSite : std::uint8_t { kSwitch, kWorker, kUplink, kDownlink };

struct TraceEvent {
    std::int64_t time = 0;
    TraceKind kind = TraceKind::kSend;
    TraceSite site = TraceSite::kSwitch;
    /// Worker index for worker and link sites.
    std::uint16_t node = 0;
    std::uint16_t wid = 0;
    std::uint8_t ver = 0;
    std::uint16_t idx = 0;
    std::uint32_t off = 0;

    bool operator==(const TraceEvent&) const = default;
};

struct SimTrace {
    std::vector<TraceEvent> events;

    bool operator==(const SimTrace&) const = default;

    std::size_t count(TraceKind kind) const noexcept;
    std::string to_jsonl() const;
    /// Throws nlohmann::json::exception or std::invalid_argument on bad input.
    static SimTrace from_jsonl(std::string_view text);
};

}  // namespace switchagg

#endif  // SWITCHAGG_TRACE_HPP_
