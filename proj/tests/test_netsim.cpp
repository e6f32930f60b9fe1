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

#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <tuple>

#include "oracles.hpp"
#include "switchagg/error.hpp"
#include "switchagg/netsim.hpp"

using namespace switchagg;

namespace {

std::vector<std::vector<std::int32_t>> ones(std::uint32_t n, std::size_t len) {
    return std::vector<std::vector<std::int32_t>>(n, std::vector<std::int32_t>(len, 1));
}

bool all_results_equal(const RoundOutcome& r, const std::vector<std::int64_t>& expected) {
    for (const auto& v : r.results) {
        if (!oracle::matches_sum(v, expected)) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("a loss-free round sums all-ones updates") {
    SimConfig cfg;
    cfg.workers = 2;
    cfg.pool_size = 4;
    Simulation sim(cfg);
    const auto out = sim.run_round(ones(2, 1000));
    for (const auto& r : out.results) {
        CHECK(r == std::vector<std::int32_t>(1000, 2));
    }
    CHECK(out.metrics.retransmissions == 0);
    CHECK(out.metrics.drops == 0);
    CHECK(out.metrics.sends == 2 * 32);  // ceil(1000 / 32) chunks per worker
    CHECK(out.metrics.multicasts == 32);
    CHECK(out.metrics.tat_ns > 0);
    CHECK(out.metrics.ate_per_sec ==
          doctest::Approx(1000.0 * 1e9 / static_cast<double>(out.metrics.tat_ns)));
}

TEST_CASE("random loss still yields the exact sum") {
    SimConfig cfg;
    cfg.workers = 4;
    cfg.pool_size = 8;
    cfg.channel.loss_prob = 0.01;
    cfg.seed = 42;
    std::mt19937_64 rng(42);
    const auto updates = oracle::random_updates(rng, 4, 20000);
    Simulation sim(cfg);
    const auto out = sim.run_round(updates);
    CHECK(all_results_equal(out, oracle::sum64(updates)));
    CHECK(out.metrics.drops > 0);
    CHECK(out.metrics.retransmissions > 0);
    CHECK(sim.phase_lag_violations() == 0);
    CHECK(sim.max_inflight() <= cfg.pool_size);
}

TEST_CASE("the same seed gives the same trace; another seed does not") {
    SimConfig cfg;
    cfg.workers = 3;
    cfg.pool_size = 4;
    cfg.channel.loss_prob = 0.05;
    cfg.channel.dup_prob = 0.01;
    cfg.seed = 9;
    std::vector<std::vector<double>> updates(3, std::vector<double>(500, 0.25));
    const QuantConfig q{1000.0, 3, 0.0};
    const auto a = run_simulation(cfg, updates, q);
    const auto b = run_simulation(cfg, updates, q);
    CHECK(a.trace == b.trace);
    CHECK(a.trace.to_jsonl() == b.trace.to_jsonl());
    const auto r = replay(a.trace, cfg, updates, q);
    CHECK(r.identical);
    CHECK(r.first_difference == a.trace.events.size());

    auto other = cfg;
    other.seed = 10;
    const auto c = run_simulation(other, updates, q);
    CHECK_FALSE(c.trace == a.trace);
    const auto mismatch = replay(a.trace, other, updates, q);
    CHECK_FALSE(mismatch.identical);
    CHECK(mismatch.first_difference < a.trace.events.size());
    for (const auto& res : c.results) {
        CHECK(res == std::vector<double>(500, 0.75));
    }
}

TEST_CASE("zero loss and zero jitter never drop or retransmit") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        SimConfig cfg;
        cfg.workers = static_cast<std::uint32_t>(1 + rng() % 8);
        cfg.pool_size = static_cast<std::uint32_t>(1 + rng() % 16);
        cfg.channel.jitter_ns = 0;
        cfg.seed = rng();
        const auto updates = oracle::random_updates(rng, cfg.workers, 1 + rng() % 3000);
        Simulation sim(cfg);
        const auto out = sim.run_round(updates);
        CHECK(all_results_equal(out, oracle::sum64(updates)));
        CHECK(out.metrics.drops == 0);
        CHECK(out.metrics.retransmissions == 0);
        CHECK(sim.trace().count(TraceKind::kTimeout) == 0);
    }
}

TEST_CASE("the example execution has the expected shape") {
    const auto updates = scenario::appendix_updates();
    Simulation sim(scenario::appendix_config(), scenario::appendix_faults());
    const auto out = sim.run_round(updates);
    CHECK(all_results_equal(out, oracle::sum64(updates)));
    const auto& tr = sim.trace();
    CHECK(tr.count(TraceKind::kDrop) == 2);
    CHECK(tr.count(TraceKind::kMulticast) == 2);
    CHECK(tr.count(TraceKind::kUnicast) == 1);
    CHECK(tr.count(TraceKind::kIgnore) == 2);
    CHECK(tr.count(TraceKind::kTimeout) == 4);
    CHECK(tr.count(TraceKind::kSend) == 10);
    CHECK(tr.count(TraceKind::kDone) == 3);
    // second multicast carries version 1, the first version 0
    std::vector<std::uint8_t> versions;
    for (const auto& e : tr.events) {
        if (e.kind == TraceKind::kMulticast) {
            versions.push_back(e.ver);
        }
    }
    CHECK(versions == std::vector<std::uint8_t>{0, 1});
    CHECK(sim.phase_lag_violations() == 0);
}

TEST_CASE("trace invariants: time order, sends precede deliveries, FIFO per link") {
    SimConfig cfg;
    cfg.workers = 4;
    cfg.pool_size = 4;
    cfg.channel.loss_prob = 0.03;
    cfg.channel.dup_prob = 0.02;
    cfg.channel.jitter_ns = 3'000;
    cfg.seed = 77;
    std::mt19937_64 rng(77);
    Simulation sim(cfg);
    const auto updates = oracle::random_updates(rng, 4, 4000);
    sim.run_round(updates);
    const auto& ev = sim.trace().events;
    using Key = std::tuple<std::uint16_t, std::uint8_t, std::uint16_t, std::uint32_t>;
    std::set<Key> sent;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        if (i > 0) {
            CHECK(ev[i - 1].time <= ev[i].time);
        }
        const Key key{ev[i].wid, ev[i].ver, ev[i].idx, ev[i].off};
        if (ev[i].kind == TraceKind::kSend) {
            sent.insert(key);
        }
        if (ev[i].kind == TraceKind::kDeliver && ev[i].site == TraceSite::kSwitch) {
            CHECK(sent.count(key) == 1);
        }
    }
    // Per uplink, a worker sends slot phases in order, so offsets delivered at
    // the switch from one worker for one slot never go backwards.
    std::map<std::pair<std::uint16_t, std::uint16_t>, std::uint32_t> last_off;
    for (const auto& e : ev) {
        if (e.kind == TraceKind::kDeliver && e.site == TraceSite::kSwitch) {
            auto [it, inserted] = last_off.try_emplace({e.wid, e.idx}, e.off);
            if (!inserted) {
                CHECK(e.off >= it->second);
                it->second = e.off;
            }
        }
    }
}

TEST_CASE("corrupted frames are rejected and recovered by retransmission") {
    SimConfig cfg;
    cfg.workers = 3;
    cfg.pool_size = 4;
    cfg.channel.corrupt_prob = 0.05;
    cfg.seed = 5;
    std::mt19937_64 rng(5);
    const auto updates = oracle::random_updates(rng, 3, 3000);
    Simulation sim(cfg);
    const auto out = sim.run_round(updates);
    CHECK(all_results_equal(out, oracle::sum64(updates)));
    CHECK(out.metrics.corruptions > 0);
    CHECK(sim.trace().count(TraceKind::kReject) > 0);
    CHECK(sim.trace().count(TraceKind::kReject) <= out.metrics.corruptions);
}

TEST_CASE("scripted faults on random targets never break the sum") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        SimConfig cfg;
        cfg.workers = static_cast<std::uint32_t>(2 + rng() % 4);
        cfg.pool_size = static_cast<std::uint32_t>(1 + rng() % 4);
        cfg.chunk = 4;
        cfg.timeout_ns = 100'000;
        cfg.seed = rng();
        cfg.record_trace = false;
        FaultScript faults;
        const int count = static_cast<int>(rng() % 6);
        for (int i = 0; i < count; ++i) {
            FaultDirective d;
            d.direction = (rng() & 1) ? LinkDirection::kUp : LinkDirection::kDown;
            if (rng() & 1) {
                d.worker = static_cast<std::uint16_t>(rng() % cfg.workers);
            }
            if (rng() & 1) {
                d.idx = static_cast<std::uint16_t>(rng() % cfg.pool_size);
            }
            d.nth = static_cast<std::uint32_t>(1 + rng() % 5);
            faults.directives.push_back(d);
        }
        const auto updates = oracle::random_updates(rng, cfg.workers, 1 + rng() % 200);
        Simulation sim(cfg, faults);
        const auto out = sim.run_round(updates);
        CHECK(all_results_equal(out, oracle::sum64(updates)));
        CHECK(sim.phase_lag_violations() == 0);
        CHECK(sim.max_inflight() <= cfg.pool_size);
    }
}

TEST_CASE("rounds stream over a persistent network") {
    SimConfig cfg;
    cfg.workers = 3;
    cfg.pool_size = 3;
    cfg.chunk = 8;
    cfg.channel.loss_prob = 0.02;
    cfg.seed = 21;
    std::mt19937_64 rng(21);
    Simulation sim(cfg);
    TimeNs last = 0;
    for (int round = 0; round < 5; ++round) {
        const auto updates = oracle::random_updates(rng, 3, 1 + rng() % 500);
        const auto out = sim.run_round(updates);
        CHECK(all_results_equal(out, oracle::sum64(updates)));
        CHECK(sim.now() >= last);
        last = sim.now();
    }
    CHECK(sim.phase_lag_violations() == 0);
}

TEST_CASE("a dead link stalls a bounded-retry round") {
    SimConfig cfg;
    cfg.workers = 2;
    cfg.pool_size = 2;
    cfg.channel.loss_prob = 1.0;
    cfg.max_retries = 3;
    Simulation sim(cfg);
    CHECK(thrown_code([&] { sim.run_round(ones(2, 64)); }) == Errc::kStalled);

    SimConfig forever = cfg;
    forever.max_retries.reset();
    forever.max_round_ns = 50'000'000;
    Simulation sim2(forever);
    CHECK(thrown_code([&] { sim2.run_round(ones(2, 64)); }) == Errc::kStalled);
}

TEST_CASE("inconsistent inputs are rejected") {
    SimConfig cfg;
    cfg.workers = 2;
    Simulation sim(cfg);
    CHECK(thrown_code([&] { sim.run_round(ones(3, 8)); }) == Errc::kConfigMismatch);
    std::vector<std::vector<std::int32_t>> ragged{{1, 2}, {1}};
    CHECK(thrown_code([&] { sim.run_round(ragged); }) == Errc::kConfigMismatch);
    CHECK(thrown_code([&] { sim.run_round(ones(2, 0)); }) == Errc::kEmptyUpdate);

    std::vector<std::vector<double>> two(2, std::vector<double>(4, 1.0));
    CHECK(thrown_code([&] { run_simulation(cfg, two, QuantConfig{10.0, 3, 0.0}); }) ==
          Errc::kConfigMismatch);

    auto bad = cfg;
    bad.channel.loss_prob = 1.5;
    CHECK(thrown_code([&] { Simulation s(bad); }) == Errc::kInvalidConfig);
    bad = cfg;
    bad.start_offsets_ns = {0};
    CHECK(thrown_code([&] { Simulation s(bad); }) == Errc::kInvalidConfig);
    bad.start_offsets_ns = {0, -1};
    CHECK(thrown_code([&] { Simulation s(bad); }) == Errc::kInvalidConfig);
    bad = cfg;
    bad.slots = {7};
    CHECK(thrown_code([&] { Simulation s(bad); }) == Errc::kInvalidConfig);
}

TEST_CASE("traces survive a JSON lines round trip") {
    const auto updates = scenario::appendix_updates();
    Simulation sim(scenario::appendix_config(), scenario::appendix_faults());
    sim.run_round(updates);
    const auto text = sim.trace().to_jsonl();
    CHECK(SimTrace::from_jsonl(text) == sim.trace());
    CHECK(text.find("{\"t\":0,\"ev\":\"send\",\"at\":\"w0\",\"wid\":0,\"ver\":0,\"idx\":0,\"off\":0}") == 0);
    CHECK_THROWS(SimTrace::from_jsonl("{\"t\":0,\"ev\":\"teleport\",\"at\":\"w0\",\"wid\":0,"
                                      "\"ver\":0,\"idx\":0,\"off\":0}"));
    CHECK_THROWS(SimTrace::from_jsonl("not json"));
}

TEST_CASE("send bins add up to the send count") {
    SimConfig cfg;
    cfg.workers = 2;
    cfg.pool_size = 8;
    cfg.bin_ns = 10'000;
    cfg.channel.loss_prob = 0.01;
    Simulation sim(cfg);
    const auto out = sim.run_round(ones(2, 50000));
    std::uint64_t total = 0;
    for (const auto& w : out.metrics.send_bins) {
        for (auto b : w) {
            total += b;
        }
    }
    CHECK(total == out.metrics.sends);
    CHECK(out.metrics.send_bins[0].size() > 1);
}
