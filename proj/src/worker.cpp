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

#include "switchagg/worker.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "switchagg/error.hpp"
#include "switchagg/quant.hpp"
#include "switchagg/switch.hpp"

namespace switchagg {

WorkerConfig WorkerConfig::contiguous(std::uint16_t wid, std::uint32_t workers,
                                      std::uint32_t pool_size, std::uint32_t chunk) {
    WorkerConfig cfg;
    cfg.wid = wid;
    cfg.workers = workers;
    cfg.chunk = chunk;
    cfg.slots.resize(pool_size);
    for (std::uint32_t i = 0; i < pool_size; ++i) {
        cfg.slots[i] = static_cast<std::uint16_t>(i);
    }
    return cfg;
}

void WorkerConfig::validate() const {
    if (workers == 0 || workers > kMaxWorkers) {
        throw Error(Errc::kInvalidConfig, "worker count must be in [1, 64]");
    }
    if (wid >= workers) {
        throw Error(Errc::kWorkerIdOutOfRange,
                    "wid " + std::to_string(wid) + " >= n " + std::to_string(workers));
    }
    if (chunk == 0) {
        throw Error(Errc::kInvalidConfig, "chunk must be positive");
    }
    if (slots.empty()) {
        throw Error(Errc::kInvalidConfig, "worker owns no slots");
    }
    if (timeout_ns <= 0) {
        throw Error(Errc::kInvalidConfig, "timeout must be positive");
    }
    std::vector<std::uint16_t> sorted = slots;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error(Errc::kInvalidConfig, "duplicate slot index");
    }
}

WorkerEngine::WorkerEngine(WorkerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::size_t m = cfg_.slots.size();
    inflight_.resize(m);
    next_ver_.assign(m, 0);
    phases_.assign(m, 0);
    const auto max_idx = *std::max_element(cfg_.slots.begin(), cfg_.slots.end());
    slot_lookup_.assign(static_cast<std::size_t>(max_idx) + 1, -1);
    for (std::size_t i = 0; i < m; ++i) {
        slot_lookup_[cfg_.slots[i]] = static_cast<std::int32_t>(i);
    }
}

std::optional<std::size_t> WorkerEngine::position_of(std::uint16_t idx) const noexcept {
    if (idx >= slot_lookup_.size() || slot_lookup_[idx] < 0) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(slot_lookup_[idx]);
}

std::vector<AggregationPacket> WorkerEngine::start_round(std::span<const std::int32_t> update,
                                                         TimeNs now) {
    if (update.empty()) {
        throw Error(Errc::kEmptyUpdate, "update has no elements");
    }
    if (active_ && !done_) {
        throw Error(Errc::kInvalidConfig, "previous round still in progress");
    }
    const std::size_t k = cfg_.chunk;
    chunks_ = (update.size() + k - 1) / k;
    if (static_cast<std::uint64_t>(cfg_.base_offset) + chunks_ * k >
        std::numeric_limits<std::uint32_t>::max()) {
        throw Error(Errc::kInvalidConfig, "update does not fit 32-bit offsets");
    }
    unpadded_ = update.size();
    update_.assign(chunks_ * k, 0);
    std::copy(update.begin(), update.end(), update_.begin());
    result_.assign(chunks_ * k, 0);
    filled_.assign(chunks_, false);
    filled_count_ = 0;
    active_ = true;
    done_ = false;

    const std::size_t initial = std::min(cfg_.slots.size(), chunks_);
    std::vector<AggregationPacket> out;
    out.reserve(initial);
    for (std::size_t i = 0; i < initial; ++i) {
        out.push_back(issue(i, i, now));
    }
    return out;
}

AggregationPacket WorkerEngine::issue(std::size_t position, std::size_t chunk, TimeNs now) {
    InflightRecord rec;
    rec.idx = cfg_.slots[position];
    rec.ver = next_ver_[position];
    rec.off = cfg_.base_offset + static_cast<std::uint32_t>(chunk * cfg_.chunk);
    rec.chunk = chunk;
    rec.phase = ++phases_[position];
    rec.deadline = now + cfg_.timeout_ns;
    next_ver_[position] ^= 1U;
    inflight_[position] = rec;
    return packet_for(position);
}

AggregationPacket WorkerEngine::packet_for(std::size_t position) const {
    const InflightRecord& rec = inflight_.at(position).value();
    AggregationPacket p;
    p.wid = cfg_.wid;
    p.ver = rec.ver;
    p.idx = rec.idx;
    p.off = rec.off;
    const auto first = update_.begin() + static_cast<std::ptrdiff_t>(rec.chunk * cfg_.chunk);
    p.vector.assign(first, first + cfg_.chunk);
    return p;
}

std::vector<AggregationPacket> WorkerEngine::on_result(const AggregationPacket& p, TimeNs now) {
    const auto pos = position_of(p.idx);
    if (!pos || !inflight_[*pos] || inflight_[*pos]->off != p.off ||
        inflight_[*pos]->ver != p.ver || p.vector.size() != cfg_.chunk) {
        ++stale_results_;
        return {};
    }
    const InflightRecord rec = *inflight_[*pos];
    inflight_[*pos].reset();
    std::copy(p.vector.begin(), p.vector.end(),
              result_.begin() + static_cast<std::ptrdiff_t>(rec.chunk * cfg_.chunk));
    filled_[rec.chunk] = true;
    if (++filled_count_ == chunks_) {
        done_ = true;
    }

    std::vector<AggregationPacket> out;
    const std::size_t next = rec.chunk + cfg_.slots.size();
    if (next < chunks_) {
        out.push_back(issue(*pos, next, now));
    }
    return out;
}

std::vector<AggregationPacket> WorkerEngine::on_timeout(TimeNs now) {
    std::vector<AggregationPacket> out;
    for (std::size_t i = 0; i < inflight_.size(); ++i) {
        auto& rec = inflight_[i];
        if (!rec || rec->deadline > now) {
            continue;
        }
        if (cfg_.max_retries && rec->retries >= *cfg_.max_retries) {
            throw Error(Errc::kRetriesExhausted,
                        "worker " + std::to_string(cfg_.wid) + " slot " + std::to_string(rec->idx) +
                            " gave up after " + std::to_string(rec->retries) + " retries");
        }
        ++rec->retries;
        ++retransmissions_;
        rec->deadline = now + cfg_.timeout_ns;
        out.push_back(packet_for(i));
    }
    return out;
}

std::optional<TimeNs> WorkerEngine::next_deadline() const {
    std::optional<TimeNs> earliest;
    for (const auto& rec : inflight_) {
        if (rec && (!earliest || rec->deadline < *earliest)) {
            earliest = rec->deadline;
        }
    }
    return earliest;
}

std::size_t WorkerEngine::inflight_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(inflight_.begin(), inflight_.end(), [](const auto& r) { return r.has_value(); }));
}

std::vector<std::int32_t> WorkerEngine::result() const {
    if (!done_) {
        throw Error(Errc::kNotComplete, std::to_string(chunks_ - filled_count_) +
                                            " chunks outstanding");
    }
    return {result_.begin(), result_.begin() + static_cast<std::ptrdiff_t>(unpadded_)};
}

std::vector<double> WorkerEngine::finalize(double scaling_factor) const {
    return dequantize(result(), scaling_factor);
}

}  // namespace switchagg
