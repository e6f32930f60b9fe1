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

#include "switchagg/bench.hpp"

#include <algorithm>
#include <sstream>

#include "switchagg/error.hpp"

namespace switchagg {
namespace {

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::size_t elements_for(std::uint64_t tensor_bytes) {
    const std::size_t elements = tensor_bytes / sizeof(std::int32_t);
    if (elements == 0) {
        throw Error(Errc::kInvalidConfig, "tensor must hold at least one 4-byte element");
    }
    return elements;
}

}  // namespace

MicrobenchResult run_microbenchmark(const MicrobenchConfig& cfg) {
    if (cfg.repeats == 0) {
        throw Error(Errc::kInvalidConfig, "repeats must be positive");
    }
    SimConfig sc;
    sc.workers = cfg.workers;
    sc.pool_size = cfg.pool_size;
    sc.chunk = cfg.chunk;
    sc.timeout_ns = cfg.timeout_ns;
    sc.channel = cfg.channel;
    sc.channel.loss_prob = cfg.loss_prob;
    sc.channel.dup_prob = cfg.dup_prob;
    sc.seed = cfg.seed;
    sc.record_trace = false;
    Simulation sim(sc);

    const std::size_t elements = elements_for(cfg.tensor_bytes);
    // f = 1: the all-ones float tensor quantizes to all-ones integers.
    const std::vector<std::vector<std::int32_t>> updates(cfg.workers,
                                                         std::vector<std::int32_t>(elements, 1));
    MicrobenchResult out;
    std::vector<double> tats;
    std::vector<double> ates;
    for (std::uint32_t r = 0; r < cfg.repeats; ++r) {
        auto round = sim.run_round(updates);
        for (const auto& result : round.results) {
            out.verified = out.verified &&
                           std::all_of(result.begin(), result.end(), [&](std::int32_t v) {
                               return v == static_cast<std::int32_t>(cfg.workers);
                           });
        }
        tats.push_back(static_cast<double>(round.metrics.tat_ns));
        ates.push_back(round.metrics.ate_per_sec);
        out.retransmissions += round.metrics.retransmissions;
        out.runs.push_back(std::move(round.metrics));
    }
    out.median_tat_ns = median(tats);
    out.median_ate_per_sec = median(ates);
    return out;
}

std::string microbench_csv(const MicrobenchConfig& cfg, const MicrobenchResult& r) {
    std::ostringstream os;
    os << "run,workers,pool_size,tensor_bytes,loss,tat_ns,ate_per_sec,sends,retransmissions,"
          "drops,unicasts\n";
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
        const auto& m = r.runs[i];
        os << i << ',' << cfg.workers << ',' << cfg.pool_size << ',' << cfg.tensor_bytes << ','
           << cfg.loss_prob << ',' << m.tat_ns << ',' << m.ate_per_sec << ',' << m.sends << ','
           << m.retransmissions << ',' << m.drops << ',' << m.unicasts << '\n';
    }
    return os.str();
}

std::optional<CommStrategy> parse_strategy(std::string_view name) {
    if (name == "ring" || name == "ring_allreduce") {
        return CommStrategy::kRingAllReduce;
    }
    if (name == "in_network" || name == "switch") {
        return CommStrategy::kInNetwork;
    }
    if (name == "dedicated_ps" || name == "ps") {
        return CommStrategy::kDedicatedPs;
    }
    return std::nullopt;
}

const char* to_string(CommStrategy s) noexcept {
    switch (s) {
        case CommStrategy::kRingAllReduce:
            return "ring_allreduce";
        case CommStrategy::kInNetwork:
            return "in_network";
        case CommStrategy::kDedicatedPs:
            return "dedicated_ps";
    }
    return "unknown";
}

double comm_cost(CommStrategy strategy, std::uint32_t workers, double update_bytes) {
    if (workers < 2) {
        throw Error(Errc::kInvalidConfig, "communication cost needs at least two workers");
    }
    if (update_bytes < 0.0) {
        throw Error(Errc::kInvalidConfig, "update size must be non-negative");
    }
    switch (strategy) {
        case CommStrategy::kRingAllReduce:
            // reduce-scatter plus all-gather, each moving (n-1)/n of U both ways
            return 4.0 * (workers - 1) * update_bytes / workers;
        case CommStrategy::kInNetwork:
        case CommStrategy::kDedicatedPs:
            // send U, receive the aggregate; a dedicated PS doubles the
            // machine count instead of the per-worker volume
            return 2.0 * update_bytes;
    }
    return 0.0;
}

std::string Timeline::to_csv() const {
    std::ostringstream os;
    os << "bin,start_ms";
    for (std::size_t w = 0; w < bins.size(); ++w) {
        os << ",w" << w;
    }
    os << ",total\n";
    const std::size_t nbins = bins.empty() ? 0 : bins.front().size();
    for (std::size_t b = 0; b < nbins; ++b) {
        std::uint64_t total = 0;
        os << b << ',' << static_cast<double>(b) * static_cast<double>(bin_ns) / 1e6;
        for (const auto& row : bins) {
            os << ',' << row[b];
            total += row[b];
        }
        os << ',' << total << '\n';
    }
    return os.str();
}

Timeline loss_timeline(const TimelineConfig& cfg) {
    SimConfig sc;
    sc.workers = cfg.workers;
    sc.pool_size = cfg.pool_size;
    sc.chunk = cfg.chunk;
    sc.timeout_ns = cfg.timeout_ns;
    sc.channel.loss_prob = cfg.loss_prob;
    sc.seed = cfg.seed;
    sc.record_trace = false;
    Simulation sim(sc);
    const std::size_t elements = elements_for(cfg.tensor_bytes);
    const std::vector<std::vector<std::int32_t>> updates(cfg.workers,
                                                         std::vector<std::int32_t>(elements, 1));
    auto round = sim.run_round(updates);

    Timeline t;
    t.bin_ns = round.metrics.bin_ns;
    t.bins = round.metrics.send_bins;
    std::size_t width = 0;
    for (const auto& row : t.bins) {
        width = std::max(width, row.size());
    }
    for (auto& row : t.bins) {
        row.resize(width, 0);
        for (auto v : row) {
            t.total_sends += v;
        }
    }
    t.metrics = std::move(round.metrics);
    return t;
}

}  // namespace switchagg
