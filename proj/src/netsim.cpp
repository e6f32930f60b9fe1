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

#include "switchagg/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "switchagg/error.hpp"

namespace switchagg {

void ChannelConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(Errc::kInvalidConfig, std::string(name) + " must be in [0, 1]");
        }
    };
    prob(loss_prob, "loss probability");
    prob(dup_prob, "duplication probability");
    prob(corrupt_prob, "corruption probability");
    if (latency_ns <= 0 || jitter_ns < 0) {
        throw Error(Errc::kInvalidConfig, "latency must be positive and jitter non-negative");
    }
    if (!(link_gbps >= 0.0)) {
        throw Error(Errc::kInvalidConfig, "link rate must be non-negative");
    }
}

void SimConfig::validate() const {
    SwitchConfig{workers, pool_size, chunk}.validate();
    channel.validate();
    if (timeout_ns <= 0 || bin_ns <= 0 || max_round_ns <= 0) {
        throw Error(Errc::kInvalidConfig, "timeout, bin width and round limit must be positive");
    }
    if (!start_offsets_ns.empty() && start_offsets_ns.size() != workers) {
        throw Error(Errc::kInvalidConfig, "need one start offset per worker");
    }
    for (auto d : start_offsets_ns) {
        if (d < 0) {
            throw Error(Errc::kInvalidConfig, "start offsets must be non-negative");
        }
    }
    for (auto idx : slots) {
        if (idx >= pool_size) {
            throw Error(Errc::kInvalidConfig, "slot " + std::to_string(idx) + " outside the pool");
        }
    }
}

struct Simulation::Impl {
    enum class Target : std::uint8_t { kSwitch, kWorker, kTimer, kStart };

    struct Event {
        TimeNs time = 0;
        std::uint64_t seq = 0;
        Target target = Target::kSwitch;
        std::uint16_t worker = 0;
        std::vector<std::uint8_t> frame;
    };

    struct Link {
        TimeNs free_at = 0;
        TimeNs last_arrival = 0;
    };

    static bool later(const Event& a, const Event& b) {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }

    explicit Impl(SimConfig c, FaultScript f)
        : cfg(std::move(c)),
          faults(std::move(f)),
          sw(SwitchConfig{cfg.workers, cfg.pool_size, cfg.chunk}),
          rng(cfg.seed) {
        if (cfg.slots.empty()) {
            for (std::uint32_t i = 0; i < cfg.pool_size; ++i) {
                cfg.slots.push_back(static_cast<std::uint16_t>(i));
            }
        }
        for (std::uint32_t w = 0; w < cfg.workers; ++w) {
            WorkerConfig wc;
            wc.wid = static_cast<std::uint16_t>(w);
            wc.workers = cfg.workers;
            wc.chunk = cfg.chunk;
            wc.slots = cfg.slots;
            wc.timeout_ns = cfg.timeout_ns;
            wc.max_retries = cfg.max_retries;
            wc.base_offset = cfg.base_offset;
            workers.emplace_back(std::move(wc));
        }
        slot_position.assign(cfg.pool_size, -1);
        for (std::size_t i = 0; i < cfg.slots.size(); ++i) {
            slot_position[cfg.slots[i]] = static_cast<std::int32_t>(i);
        }
        up.resize(cfg.workers);
        down.resize(cfg.workers);
        timer_at.resize(cfg.workers);
        fault_hits.assign(faults.directives.size(), 0);
        fault_fired.assign(faults.directives.size(), false);
        const double wire_bytes =
            static_cast<double>(frame_size(cfg.chunk) + cfg.channel.header_overhead_bytes);
        if (cfg.channel.link_gbps > 0.0) {
            serialization_ns =
                std::max<TimeNs>(1, std::llround(wire_bytes * 8.0 / cfg.channel.link_gbps));
        }
    }

    double uniform() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

    void record(TraceKind kind, TraceSite site, std::uint16_t node, const AggregationPacket& p) {
        if (!cfg.record_trace) {
            return;
        }
        trace.events.push_back(TraceEvent{now, kind, site, node, p.wid, p.ver, p.idx, p.off});
    }

    void push(TimeNs time, Target target, std::uint16_t worker, std::vector<std::uint8_t> frame) {
        heap.push_back(Event{time, seq++, target, worker, std::move(frame)});
        std::push_heap(heap.begin(), heap.end(), later);
    }

    Event pop() {
        std::pop_heap(heap.begin(), heap.end(), later);
        Event e = std::move(heap.back());
        heap.pop_back();
        return e;
    }

    bool scripted_drop(LinkDirection dir, std::uint16_t worker, const AggregationPacket& p) {
        for (std::size_t i = 0; i < faults.directives.size(); ++i) {
            const auto& d = faults.directives[i];
            if (fault_fired[i] || d.direction != dir) {
                continue;
            }
            if ((d.worker && *d.worker != worker) || (d.idx && *d.idx != p.idx) ||
                (d.off && *d.off != p.off) || (d.ver && *d.ver != p.ver)) {
                continue;
            }
            if (++fault_hits[i] == d.nth) {
                fault_fired[i] = true;
                return true;
            }
        }
        return false;
    }

    void deliver_copy(Link& link, TimeNs depart, LinkDirection dir, std::uint16_t worker,
                      const AggregationPacket& p, std::vector<std::uint8_t> frame) {
        const ChannelConfig& ch = cfg.channel;
        TimeNs delay = ch.latency_ns;
        if (ch.jitter_ns > 0) {
            const auto span = static_cast<double>(2 * ch.jitter_ns + 1);
            delay += static_cast<TimeNs>(uniform() * span) - ch.jitter_ns;
        }
        delay = std::max<TimeNs>(1, delay);
        const TimeNs arrival = std::max(link.last_arrival, depart + delay);
        link.last_arrival = arrival;
        if (ch.corrupt_prob > 0.0 && uniform() < ch.corrupt_prob) {
            const auto bit = static_cast<std::size_t>(uniform() * static_cast<double>(frame.size() * 8));
            frame[bit / 8] ^= static_cast<std::uint8_t>(1U << (bit % 8));
            ++metrics.corruptions;
            record(TraceKind::kCorrupt, site_of(dir), worker, p);
        }
        push(arrival, dir == LinkDirection::kUp ? Target::kSwitch : Target::kWorker, worker,
             std::move(frame));
    }

    static TraceSite site_of(LinkDirection dir) {
        return dir == LinkDirection::kUp ? TraceSite::kUplink : TraceSite::kDownlink;
    }

    void transmit(LinkDirection dir, std::uint16_t worker, const AggregationPacket& p,
                  const std::vector<std::uint8_t>& frame) {
        Link& link = dir == LinkDirection::kUp ? up[worker] : down[worker];
        TimeNs depart = std::max(now, link.free_at) + serialization_ns;
        link.free_at = depart;
        const ChannelConfig& ch = cfg.channel;
        if (scripted_drop(dir, worker, p) || (ch.loss_prob > 0.0 && uniform() < ch.loss_prob)) {
            ++metrics.drops;
            record(TraceKind::kDrop, site_of(dir), worker, p);
            return;
        }
        deliver_copy(link, depart, dir, worker, p, frame);
        if (ch.dup_prob > 0.0 && uniform() < ch.dup_prob) {
            ++metrics.dups;
            record(TraceKind::kDup, site_of(dir), worker, p);
            depart = link.free_at + serialization_ns;
            link.free_at = depart;
            deliver_copy(link, depart, dir, worker, p, frame);
        }
    }

    void send_up(std::uint16_t w, const AggregationPacket& p) {
        record(TraceKind::kSend, TraceSite::kWorker, w, p);
        ++metrics.sends;
        const auto bin = static_cast<std::size_t>((now - round_start) / cfg.bin_ns);
        auto& bins = metrics.send_bins[w];
        if (bins.size() <= bin) {
            bins.resize(bin + 1, 0);
        }
        ++bins[bin];
        transmit(LinkDirection::kUp, w, p, encode_packet(p, cfg.chunk));
    }

    void observe_new_phase(std::uint16_t w, const AggregationPacket& p) {
        const auto pos = static_cast<std::size_t>(slot_position[p.idx]);
        const std::uint64_t phase = workers[w].phases_started()[pos];
        for (const auto& other : workers) {
            if (other.phases_started()[pos] + 1 < phase) {
                ++lag_violations;
            }
        }
    }

    void arm(std::uint16_t w) {
        const auto deadline = workers[w].next_deadline();
        if (deadline && (!timer_at[w] || *deadline < *timer_at[w])) {
            timer_at[w] = deadline;
            push(*deadline, Target::kTimer, w, {});
        }
        max_inflight_seen = std::max(max_inflight_seen, workers[w].inflight_count());
    }

    void on_switch_frame(const Event& e) {
        const auto decoded = decode_packet(e.frame, cfg.chunk);
        if (!decoded.ok()) {
            record(TraceKind::kReject, TraceSite::kSwitch, 0, AggregationPacket{});
            return;
        }
        const AggregationPacket& p = decoded.packet;
        record(TraceKind::kDeliver, TraceSite::kSwitch, 0, p);
        SwitchAction action;
        try {
            action = sw.handle_packet(p);
        } catch (const Error&) {
            record(TraceKind::kReject, TraceSite::kSwitch, 0, p);
            return;
        }
        switch (action.kind) {
            case SwitchAction::Kind::kDrop:
                if (action.applied) {
                    record(TraceKind::kAggregate, TraceSite::kSwitch, 0, p);
                } else {
                    ++metrics.ignored;
                    record(TraceKind::kIgnore, TraceSite::kSwitch, 0, p);
                }
                break;
            case SwitchAction::Kind::kMulticast: {
                ++metrics.multicasts;
                record(TraceKind::kMulticast, TraceSite::kSwitch, 0, action.packet);
                const auto frame = encode_packet(action.packet, cfg.chunk);
                for (std::uint32_t w = 0; w < cfg.workers; ++w) {
                    transmit(LinkDirection::kDown, static_cast<std::uint16_t>(w), action.packet,
                             frame);
                }
                break;
            }
            case SwitchAction::Kind::kUnicast:
                ++metrics.unicasts;
                record(TraceKind::kUnicast, TraceSite::kSwitch, 0, action.packet);
                transmit(LinkDirection::kDown, action.dest, action.packet,
                         encode_packet(action.packet, cfg.chunk));
                break;
        }
    }

    void on_worker_frame(const Event& e) {
        const std::uint16_t w = e.worker;
        const auto decoded = decode_packet(e.frame, cfg.chunk);
        if (!decoded.ok()) {
            record(TraceKind::kReject, TraceSite::kWorker, w, AggregationPacket{});
            return;
        }
        const AggregationPacket& p = decoded.packet;
        record(TraceKind::kDeliver, TraceSite::kWorker, w, p);
        WorkerEngine& engine = workers[w];
        const bool was_done = engine.done();
        const auto stale_before = engine.stale_results();
        const auto next = engine.on_result(p, now);
        if (engine.stale_results() != stale_before) {
            ++metrics.stale_results;
            record(TraceKind::kStale, TraceSite::kWorker, w, p);
        }
        for (const auto& q : next) {
            observe_new_phase(w, q);
            send_up(w, q);
        }
        if (!was_done && engine.done() && engine.active()) {
            done_at[w] = now;
            record(TraceKind::kDone, TraceSite::kWorker, w, p);
        }
        arm(w);
    }

    void on_timer(const Event& e) {
        const std::uint16_t w = e.worker;
        if (timer_at[w] && *timer_at[w] == e.time) {
            timer_at[w].reset();
        }
        std::vector<AggregationPacket> retransmit;
        try {
            retransmit = workers[w].on_timeout(now);
        } catch (const Error& err) {
            throw Error(Errc::kStalled, err.what());
        }
        for (const auto& p : retransmit) {
            record(TraceKind::kTimeout, TraceSite::kWorker, w, p);
            ++metrics.retransmissions;
            send_up(w, p);
        }
        arm(w);
    }

    void start_worker(std::uint16_t w) {
        for (const auto& p : workers[w].start_round(pending[w], now)) {
            observe_new_phase(w, p);
            send_up(w, p);
        }
        arm(w);
    }

    bool all_done() const {
        return std::all_of(done_at.begin(), done_at.end(), [](TimeNs t) { return t >= 0; });
    }

    RoundOutcome run_round(std::span<const std::vector<std::int32_t>> updates) {
        if (updates.size() != cfg.workers) {
            throw Error(Errc::kConfigMismatch, "expected " + std::to_string(cfg.workers) +
                                                   " updates, got " +
                                                   std::to_string(updates.size()));
        }
        const std::size_t len = updates.front().size();
        for (const auto& u : updates) {
            if (u.size() != len) {
                throw Error(Errc::kConfigMismatch, "workers submitted updates of different sizes");
            }
        }
        if (len == 0) {
            throw Error(Errc::kEmptyUpdate, "update has no elements");
        }

        metrics = RunMetrics{};
        metrics.bin_ns = cfg.bin_ns;
        metrics.elements = len;
        metrics.send_bins.assign(cfg.workers, {});
        round_start = now;
        done_at.assign(cfg.workers, -1);

        pending = updates;
        for (std::uint32_t w = 0; w < cfg.workers; ++w) {
            const auto wid = static_cast<std::uint16_t>(w);
            const TimeNs delay = cfg.start_offsets_ns.empty() ? 0 : cfg.start_offsets_ns[w];
            if (delay > 0) {
                push(now + delay, Target::kStart, wid, {});
            } else {
                start_worker(wid);
            }
        }

        while (!all_done()) {
            if (heap.empty()) {
                throw Error(Errc::kStalled, "no pending events");
            }
            Event e = pop();
            if (e.time - round_start > cfg.max_round_ns) {
                throw Error(Errc::kStalled, "round exceeded the simulated time limit");
            }
            now = e.time;
            switch (e.target) {
                case Target::kSwitch: on_switch_frame(e); break;
                case Target::kWorker: on_worker_frame(e); break;
                case Target::kTimer: on_timer(e); break;
                case Target::kStart: start_worker(e.worker); break;
            }
        }

        RoundOutcome out;
        out.results.reserve(cfg.workers);
        metrics.worker_tat_ns.resize(cfg.workers);
        for (std::uint32_t w = 0; w < cfg.workers; ++w) {
            out.results.push_back(workers[w].result());
            metrics.worker_tat_ns[w] = done_at[w] - round_start;
            metrics.tat_ns = std::max(metrics.tat_ns, metrics.worker_tat_ns[w]);
        }
        metrics.finish();
        out.metrics = metrics;
        return out;
    }

    SimConfig cfg;
    FaultScript faults;
    std::vector<std::uint32_t> fault_hits;
    std::vector<bool> fault_fired;
    AggregationSwitch sw;
    std::vector<WorkerEngine> workers;
    std::mt19937_64 rng;
    SimTrace trace;
    RunMetrics metrics;
    TimeNs now = 0;
    TimeNs round_start = 0;
    TimeNs serialization_ns = 0;
    std::uint64_t seq = 0;
    std::vector<Event> heap;
    std::vector<Link> up;
    std::vector<Link> down;
    std::vector<std::optional<TimeNs>> timer_at;
    std::vector<TimeNs> done_at;
    std::span<const std::vector<std::int32_t>> pending;  // this round's updates
    std::vector<std::int32_t> slot_position;
    std::uint64_t lag_violations = 0;
    std::size_t max_inflight_seen = 0;
};

Simulation::Simulation(SimConfig cfg, FaultScript faults) {
    cfg.validate();
    impl_ = std::make_unique<Impl>(std::move(cfg), std::move(faults));
}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

RoundOutcome Simulation::run_round(std::span<const std::vector<std::int32_t>> updates) {
    return impl_->run_round(updates);
}

const SimTrace& Simulation::trace() const noexcept { return impl_->trace; }
TimeNs Simulation::now() const noexcept { return impl_->now; }
const AggregationSwitch& Simulation::switch_state() const noexcept { return impl_->sw; }
const WorkerEngine& Simulation::worker(std::size_t w) const { return impl_->workers.at(w); }
const SimConfig& Simulation::config() const noexcept { return impl_->cfg; }
std::uint64_t Simulation::phase_lag_violations() const noexcept { return impl_->lag_violations; }
std::size_t Simulation::max_inflight() const noexcept { return impl_->max_inflight_seen; }

SimulationResult run_simulation(const SimConfig& cfg, std::span<const std::vector<double>> updates,
                                const QuantConfig& quant, const FaultScript& faults) {
    quant.validate();
    if (quant.workers != cfg.workers || updates.size() != cfg.workers) {
        throw Error(Errc::kConfigMismatch, "worker count differs between configs and updates");
    }
    std::vector<std::vector<std::int32_t>> quantized;
    quantized.reserve(updates.size());
    for (const auto& u : updates) {
        quantized.push_back(quantize(u, quant.scaling_factor));
    }
    Simulation sim(cfg, faults);
    auto round = sim.run_round(quantized);

    SimulationResult out;
    out.results.reserve(round.results.size());
    for (const auto& r : round.results) {
        out.results.push_back(dequantize(r, quant.scaling_factor));
    }
    out.trace = sim.trace();
    out.metrics = std::move(round.metrics);
    out.phase_lag_violations = sim.phase_lag_violations();
    out.max_inflight = sim.max_inflight();
    return out;
}

ReplayReport replay(const SimTrace& recorded, const SimConfig& cfg,
                    std::span<const std::vector<double>> updates, const QuantConfig& quant,
                    const FaultScript& faults) {
    SimConfig traced = cfg;
    traced.record_trace = true;
    ReplayReport report;
    report.trace = run_simulation(traced, updates, quant, faults).trace;
    report.identical = report.trace == recorded;
    const auto& a = recorded.events;
    const auto& b = report.trace.events;
    const auto mismatch = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
    report.first_difference = static_cast<std::size_t>(mismatch.first - a.begin());
    return report;
}

}  // namespace switchagg
