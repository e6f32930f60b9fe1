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

#include "switchagg/collective.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <string>

#include "switchagg/error.hpp"
#include "switchagg/quant.hpp"

namespace switchagg {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void merge_into(RunMetrics& total, const RunMetrics& part) {
    total.tat_ns = std::max(total.tat_ns, part.tat_ns);
    if (total.worker_tat_ns.size() < part.worker_tat_ns.size()) {
        total.worker_tat_ns.resize(part.worker_tat_ns.size(), 0);
    }
    for (std::size_t w = 0; w < part.worker_tat_ns.size(); ++w) {
        total.worker_tat_ns[w] = std::max(total.worker_tat_ns[w], part.worker_tat_ns[w]);
    }
    total.sends += part.sends;
    total.retransmissions += part.retransmissions;
    total.drops += part.drops;
    total.dups += part.dups;
    total.corruptions += part.corruptions;
    total.ignored += part.ignored;
    total.multicasts += part.multicasts;
    total.unicasts += part.unicasts;
    total.stale_results += part.stale_results;
    total.bin_ns = part.bin_ns;
    if (total.send_bins.size() < part.send_bins.size()) {
        total.send_bins.resize(part.send_bins.size());
    }
    for (std::size_t w = 0; w < part.send_bins.size(); ++w) {
        auto& dst = total.send_bins[w];
        const auto& src = part.send_bins[w];
        if (dst.size() < src.size()) {
            dst.resize(src.size(), 0);
        }
        for (std::size_t b = 0; b < src.size(); ++b) {
            dst[b] += src[b];
        }
    }
}

}  // namespace

ShardPlan shard_tensor(std::size_t len, std::size_t shards, std::size_t k, std::size_t s) {
    if (shards == 0 || k == 0 || s == 0) {
        throw Error(Errc::kInvalidConfig, "shards, chunk and pool size must be positive");
    }
    const std::size_t chunks = (len + k - 1) / k;
    const std::size_t base = chunks / shards;
    const std::size_t extra = chunks % shards;
    ShardPlan plan;
    plan.shards.resize(shards);
    std::size_t chunk_begin = 0;
    for (std::size_t j = 0; j < shards; ++j) {
        const std::size_t count = base + (j < extra ? 1 : 0);
        ShardRegion& r = plan.shards[j];
        r.begin = std::min(len, chunk_begin * k);
        r.end = std::min(len, (chunk_begin + count) * k);
        chunk_begin += count;
        for (std::size_t idx = j; idx < s; idx += shards) {
            r.slots.push_back(static_cast<std::uint16_t>(idx));
        }
    }
    return plan;
}

std::uint32_t tune_pool_size(double bdp_bytes, double frame_bytes) {
    if (!(bdp_bytes > 0.0) || !(frame_bytes > 0.0)) {
        throw Error(Errc::kInvalidConfig, "bandwidth-delay product and frame size must be positive");
    }
    const double slots = std::ceil(bdp_bytes / frame_bytes);
    if (slots > 65536.0) {
        throw Error(Errc::kInvalidConfig, "pool size would exceed 65536 slots");
    }
    return std::bit_ceil(static_cast<std::uint32_t>(slots));
}

SimulatedCollective::SimulatedCollective(CollectiveConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.shards == 0 || cfg_.shards > cfg_.pool_size) {
        throw Error(Errc::kInvalidConfig, "shard count must be in [1, pool size]");
    }
    QuantConfig{cfg_.scaling_factor, cfg_.workers, 0.0}.validate();
    const auto plan = shard_tensor(0, cfg_.shards, cfg_.chunk, cfg_.pool_size);
    shards_.reserve(cfg_.shards);
    for (std::uint32_t j = 0; j < cfg_.shards; ++j) {
        SimConfig sc;
        sc.workers = cfg_.workers;
        sc.pool_size = cfg_.pool_size;
        sc.chunk = cfg_.chunk;
        sc.timeout_ns = cfg_.timeout_ns;
        sc.max_retries = cfg_.max_retries;
        sc.channel = cfg_.channel;
        sc.seed = cfg_.shards == 1 ? cfg_.seed : splitmix64(cfg_.seed + j);
        sc.record_trace = cfg_.record_trace;
        sc.slots = plan.shards[j].slots;
        shards_.emplace_back(std::move(sc));
    }
}

std::vector<std::vector<double>> SimulatedCollective::all_reduce(std::span<const Tensor> inputs) {
    if (inputs.size() != cfg_.workers) {
        throw Error(Errc::kConfigMismatch, "expected one tensor per worker");
    }
    const std::uint64_t id = inputs.front().id;
    const std::size_t len = inputs.front().values.size();
    for (const auto& t : inputs) {
        if (t.id != id) {
            throw Error(Errc::kOrderMismatch, "workers submitted tensors " + std::to_string(id) +
                                                  " and " + std::to_string(t.id));
        }
        if (t.values.size() != len) {
            throw Error(Errc::kConfigMismatch, "tensor " + std::to_string(id) +
                                                   " has different sizes across workers");
        }
    }
    if (len == 0) {
        throw Error(Errc::kEmptyUpdate, "tensor " + std::to_string(id) + " is empty");
    }

    std::vector<std::vector<std::int32_t>> quantized;
    quantized.reserve(inputs.size());
    for (const auto& t : inputs) {
        quantized.push_back(quantize(t.values, cfg_.scaling_factor));
    }

    const auto plan = shard_tensor(len, cfg_.shards, cfg_.chunk, cfg_.pool_size);
    std::vector<std::vector<std::int32_t>> summed(cfg_.workers, std::vector<std::int32_t>(len));
    std::vector<RunMetrics> shard_metrics(cfg_.shards);
    std::vector<std::exception_ptr> errors(cfg_.shards);

    const auto shard_count = static_cast<std::ptrdiff_t>(cfg_.shards);
#pragma omp parallel for schedule(dynamic) if (shard_count > 1)
    for (std::ptrdiff_t j = 0; j < shard_count; ++j) {
        const ShardRegion& region = plan.shards[static_cast<std::size_t>(j)];
        if (region.empty()) {
            continue;
        }
        try {
            std::vector<std::vector<std::int32_t>> parts;
            parts.reserve(cfg_.workers);
            for (const auto& q : quantized) {
                parts.emplace_back(q.begin() + static_cast<std::ptrdiff_t>(region.begin),
                                   q.begin() + static_cast<std::ptrdiff_t>(region.end));
            }
            auto round = shards_[static_cast<std::size_t>(j)].run_round(parts);
            for (std::size_t w = 0; w < cfg_.workers; ++w) {
                std::copy(round.results[w].begin(), round.results[w].end(),
                          summed[w].begin() + static_cast<std::ptrdiff_t>(region.begin));
            }
            shard_metrics[static_cast<std::size_t>(j)] = std::move(round.metrics);
        } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    TensorReport report;
    report.id = id;
    report.metrics.elements = len;
    for (const auto& m : shard_metrics) {
        merge_into(report.metrics, m);
    }
    report.metrics.finish();
    report.packets_per_worker =
        (report.metrics.sends - report.metrics.retransmissions) / cfg_.workers;
    reports_.push_back(std::move(report));

    const double divisor = cfg_.reduction == Reduction::kAverage ? cfg_.workers : 1.0;
    std::vector<std::vector<double>> out;
    out.reserve(cfg_.workers);
    for (const auto& s : summed) {
        auto values = dequantize(s, cfg_.scaling_factor);
        if (divisor != 1.0) {
            for (auto& v : values) {
                v /= divisor;
            }
        }
        out.push_back(std::move(values));
    }
    return out;
}

std::vector<std::vector<std::vector<double>>> SimulatedCollective::run_job(
    std::span<const TensorJob> jobs) {
    if (jobs.size() != cfg_.workers) {
        throw Error(Errc::kConfigMismatch, "expected one job per worker");
    }
    const std::size_t count = jobs.front().tensors.size();
    for (const auto& job : jobs) {
        if (job.tensors.size() != count) {
            throw Error(Errc::kOrderMismatch, "workers submitted different numbers of tensors");
        }
    }
    std::vector<std::vector<std::vector<double>>> results(cfg_.workers);
    std::vector<Tensor> step(cfg_.workers);
    for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t w = 0; w < cfg_.workers; ++w) {
            step[w] = jobs[w].tensors[t];
        }
        auto reduced = all_reduce(step);
        for (std::size_t w = 0; w < cfg_.workers; ++w) {
            results[w].push_back(std::move(reduced[w]));
        }
    }
    return results;
}

std::uint64_t SimulatedCollective::phase_lag_violations() const noexcept {
    std::uint64_t total = 0;
    for (const auto& s : shards_) {
        total += s.phase_lag_violations();
    }
    return total;
}

UdpCollective::UdpCollective(UdpWorkerConfig cfg, Reduction reduction)
    : worker_(std::move(cfg)), reduction_(reduction) {}

void UdpCollective::register_worker() {
    std::lock_guard lock(mu_);
    if (!registered_) {
        worker_.join();
        registered_ = true;
    }
}

std::vector<double> UdpCollective::all_reduce(const Tensor& tensor) {
    std::lock_guard lock(mu_);
    if (!registered_ || closed_) {
        throw Error(Errc::kInvalidConfig, "all_reduce needs a registered, open collective");
    }
    const double f = worker_.config().scaling_factor;
    const auto sum = worker_.aggregate(tensor.id, quantize(tensor.values, f));
    auto values = dequantize(sum, f);
    if (reduction_ == Reduction::kAverage) {
        const double n = worker_.config().workers;
        for (auto& v : values) {
            v /= n;
        }
    }
    return values;
}

void UdpCollective::shutdown() {
    std::lock_guard lock(mu_);
    if (registered_ && !closed_) {
        worker_.leave();
    }
    closed_ = true;
}

}  // namespace switchagg
