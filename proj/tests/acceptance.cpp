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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
//
//   acceptance [--only N] [--write-golden]

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "switchagg/bench.hpp"
#include "switchagg/collective.hpp"
#include "switchagg/netsim.hpp"
#include "switchagg/quant.hpp"
#include "switchagg/switch.hpp"
#include "switchagg/worker.hpp"

using namespace switchagg;

namespace {

#ifndef SWITCHAGG_GOLDEN_DIR
#define SWITCHAGG_GOLDEN_DIR "tests/golden"
#endif

const std::string kGoldenPath = std::string(SWITCHAGG_GOLDEN_DIR) + "/appendix_a_trace.jsonl";

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Scripted three-worker run with one lost update and one lost result.
Verdict ac1(bool write_golden) {
    const auto t0 = Clock::now();
    const auto updates = scenario::appendix_updates();
    Simulation sim(scenario::appendix_config(), scenario::appendix_faults());
    const auto out = sim.run_round(updates);
    const double elapsed = seconds_since(t0);
    const auto text = sim.trace().to_jsonl();
    if (write_golden) {
        std::ofstream(kGoldenPath) << text;
    }
    std::ifstream in(kGoldenPath);
    std::stringstream golden;
    golden << in.rdbuf();
    if (!in) {
        return {false, "cannot read " + kGoldenPath};
    }

    const auto& tr = sim.trace();
    const auto expected = oracle::sum64(updates);
    bool sums = true;
    for (const auto& r : out.results) {
        sums = sums && oracle::matches_sum(r, expected);
    }
    // Qualitative transitions, in order: the two ignored retransmissions,
    // the completing one with its 3-way multicast, the lost result, the
    // unicast re-reply, and the final multicast on version 1.
    std::vector<std::string> story;
    for (const auto& e : tr.events) {
        if (e.kind == TraceKind::kIgnore || e.kind == TraceKind::kMulticast ||
            e.kind == TraceKind::kUnicast ||
            (e.kind == TraceKind::kDrop && e.site == TraceSite::kDownlink)) {
            story.push_back(std::string(to_string(e.kind)) + ":" + std::to_string(e.wid) + ":" +
                            std::to_string(e.ver));
        }
    }
    const std::vector<std::string> want{"multicast:2:0", "drop:2:0",  // result towards w0 lost
                                        "unicast:0:0", "multicast:0:1"};
    std::vector<std::string> tail;
    std::vector<std::string> ignores;
    for (const auto& s : story) {
        (s.rfind("ignore", 0) == 0 ? ignores : tail).push_back(s);
    }
    const bool shape_ignores =
        ignores == std::vector<std::string>{"ignore:0:0", "ignore:1:0"} && tail == want;
    // version-0 results on the downlinks: three multicast copies, one re-reply
    std::size_t results_v0 = 0;
    for (const auto& e : tr.events) {
        const bool lost = e.kind == TraceKind::kDrop && e.site == TraceSite::kDownlink;
        const bool arrived = e.kind == TraceKind::kDeliver && e.site == TraceSite::kWorker;
        if (e.ver == 0 && (lost || arrived)) {
            ++results_v0;
        }
    }
    const bool shape = shape_ignores && results_v0 == 4;
    const bool exact = golden.str() == text;
    const bool fast = elapsed < 1.0;
    std::string detail = "trace " + std::string(exact ? "matches" : "DIFFERS from") + " golden (" +
                         std::to_string(tr.events.size()) + " events), transitions " +
                         (shape ? "ok" : "WRONG") + ", sums " + (sums ? "ok" : "WRONG") + ", " +
                         fmt("%.3f s", elapsed);
    return {exact && shape && sums && fast, detail};
}

Verdict ac2() {
    bool ok = true;
    const auto a = quantize(std::vector<double>{1.56}, 100.0);
    const auto b = quantize(std::vector<double>{4.23}, 100.0);
    ok = ok && a[0] == 156 && b[0] == 423;
    AggregationSwitch sw({2, 1, 1});
    sw.handle_packet(AggregationPacket{0, 0, 0, 0, a});
    const auto r = sw.handle_packet(AggregationPacket{1, 0, 0, 0, b});
    ok = ok && r.kind == SwitchAction::Kind::kMulticast && r.packet.vector[0] == 579;
    const double v = dequantize(r.packet.vector, 100.0)[0];
    ok = ok && std::abs(v - 5.79) <= 1e-12;

    const auto c = quantize(std::vector<double>{1.56}, 10.0);
    const auto d = quantize(std::vector<double>{4.23}, 10.0);
    ok = ok && c[0] == 16 && d[0] == 42;
    const double w = dequantize(std::vector<std::int32_t>{c[0] + d[0]}, 10.0)[0];
    ok = ok && std::abs(w - 5.8) <= 1e-12;
    const double err = std::abs(w - (1.56 + 4.23));
    ok = ok && std::abs(err - 0.01) <= 1e-12 && err <= aggregation_error_bound(2, 10.0);
    return {ok, fmt("579 -> 5.79, 58 -> 5.8, error %.12g <= 0.2", err)};
}

Verdict ac3() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20260301);
    std::uniform_real_distribution<double> log_b(-3.0, 3.0);
    std::size_t failures = 0;
    std::uint64_t overflows = 0;
    double worst = 0.0;  // largest error / (n / f)
    for (int trial = 0; trial < 10000; ++trial) {
        const auto n = static_cast<std::uint32_t>(1 + rng() % 8);
        const double bound = std::pow(10.0, log_b(rng));
        const double f = choose_scaling_factor(n, bound);
        const std::size_t len = 1 + rng() % 64;
        std::uniform_real_distribution<double> d(-bound, bound);
        std::vector<std::vector<double>> xs(n, std::vector<double>(len));
        for (auto& x : xs) {
            for (auto& v : x) {
                v = d(rng);
            }
            x[rng() % len] = (rng() & 1) ? bound : -bound;
        }
        AggregationSwitch sw({n, 1, static_cast<std::uint32_t>(len)});
        SwitchAction last;
        for (std::uint16_t w = 0; w < n; ++w) {
            last = sw.handle_packet(AggregationPacket{w, 0, 0, 0, quantize(xs[w], f)});
        }
        overflows += sw.overflow_events();
        const auto agg = dequantize(last.packet.vector, f);
        const auto exact = oracle::sum_doubles(xs);
        const double limit = aggregation_error_bound(n, f);
        for (std::size_t i = 0; i < len; ++i) {
            const double e = std::abs(agg[i] - exact[i]);
            worst = std::max(worst, e / limit);
            failures += e <= limit ? 0 : 1;
        }
    }
    const double elapsed = seconds_since(t0);
    return {failures == 0 && overflows == 0 && elapsed < 60.0,
            "10000 instances, " + std::to_string(failures) + " bound violations, " +
                std::to_string(overflows) + " overflows, worst error " +
                fmt("%.3f of n/f", worst) + ", " + fmt("%.2f s", elapsed)};
}

Verdict ac4() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(4242);
    const int runs = 1000;
    int wrong = 0;
    std::uint64_t lag = 0;
    std::uint64_t drops = 0;
    std::uint64_t dups = 0;
    for (int i = 0; i < runs; ++i) {
        SimConfig cfg;
        cfg.workers = static_cast<std::uint32_t>(2 + rng() % 7);
        cfg.pool_size = static_cast<std::uint32_t>(1 + rng() % 16);
        cfg.channel.loss_prob = std::uniform_real_distribution<double>(0.0, 0.05)(rng);
        cfg.channel.dup_prob = std::uniform_real_distribution<double>(0.0, 0.01)(rng);
        cfg.channel.jitter_ns = static_cast<TimeNs>(rng() % 4000);
        cfg.timeout_ns = 200'000;
        cfg.seed = rng();
        cfg.record_trace = false;
        const std::size_t len = 1 + rng() % 4096;  // up to 16 KiB of int32
        const auto updates = oracle::random_updates(rng, cfg.workers, len);
        Simulation sim(cfg);
        const auto out = sim.run_round(updates);
        const auto expected = oracle::sum64(updates);
        for (const auto& r : out.results) {
            if (!oracle::matches_sum(r, expected)) {
                ++wrong;
                break;
            }
        }
        lag += sim.phase_lag_violations();
        drops += out.metrics.drops;
        dups += out.metrics.dups;
    }
    const double elapsed = seconds_since(t0);
    return {wrong == 0 && lag == 0 && elapsed < 300.0,
            std::to_string(runs) + " runs, " + std::to_string(wrong) + " wrong sums, " +
                std::to_string(lag) + " phase-lag violations, " + std::to_string(drops) +
                " drops, " + std::to_string(dups) + " dups, " + fmt("%.1f s", elapsed)};
}

Verdict ac5() {
    const auto t0 = Clock::now();
    const double levels[] = {0.0, 1e-4, 1e-3, 1e-2};
    double tat[4] = {};
    for (int i = 0; i < 4; ++i) {
        MicrobenchConfig cfg;
        cfg.workers = 8;
        cfg.pool_size = 128;
        cfg.tensor_bytes = 100'000'000;
        cfg.repeats = 3;
        cfg.loss_prob = levels[i];
        cfg.seed = 5;
        const auto r = run_microbenchmark(cfg);
        if (!r.verified) {
            return {false, fmt("wrong aggregate at loss %g", levels[i])};
        }
        tat[i] = r.median_tat_ns;
    }
    const bool order = tat[3] > tat[2] && tat[2] > tat[1] && tat[1] > tat[0];
    const double inflation = tat[1] / tat[0] - 1.0;
    std::string detail = "median TAT ms:";
    for (int i = 0; i < 4; ++i) {
        detail += fmt(" %.1f", tat[i] / 1e6);
    }
    detail += fmt(", 0.01%% loss +%.1f%%", 100.0 * inflation);
    detail += fmt(", %.0f s", seconds_since(t0));
    return {order && inflation <= 0.10, detail};
}

Verdict ac6() {
    const double frame = 180.0;
    const double bdp10 = 10e9 / 8.0 * 10e-6;  // 10 Gbps, 10 us RTT
    const double bdp100 = 100e9 / 8.0 * 5e-6;  // 100 Gbps, 5 us RTT
    const auto s10 = tune_pool_size(bdp10, frame);
    const auto s100 = tune_pool_size(bdp100, frame);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> log_bdp(0.0, 6.0);
    std::uniform_real_distribution<double> fr(16.0, 9000.0);
    int bad = 0;
    for (int i = 0; i < 100000; ++i) {
        const double b = std::pow(10.0, log_bdp(rng));
        const double f = fr(rng);
        const auto s = tune_pool_size(b, f);
        const bool minimal = s == 1 || static_cast<double>(s / 2) * f < b;
        bad += (std::has_single_bit(s) && static_cast<double>(s) * f >= b && minimal) ? 0 : 1;
    }
    return {s10 == 128 && s100 == 512 && bad == 0,
            "10 Gbps -> " + std::to_string(s10) + ", 100 Gbps -> " + std::to_string(s100) +
                ", " + std::to_string(bad) + " property violations in 100000"};
}

Verdict ac7() {
    int bad = 0;
    const double sizes[] = {1.0, 4.0, 1e6, 102.4e6, 3.0};
    for (std::uint32_t n = 2; n <= 64; ++n) {
        for (double u : sizes) {
            bad += comm_cost(CommStrategy::kRingAllReduce, n, u) == 4.0 * (n - 1) * u / n ? 0 : 1;
            bad += comm_cost(CommStrategy::kInNetwork, n, u) == 2.0 * u ? 0 : 1;
            bad += comm_cost(CommStrategy::kDedicatedPs, n, u) == 2.0 * u ? 0 : 1;
        }
    }
    return {bad == 0, "n in [2,64], " + std::to_string(bad) + " mismatches"};
}

Verdict ac8() {
    const auto t0 = Clock::now();
    TrainConfig cfg;
    cfg.workers = 4;
    cfg.epochs = 20;
    const auto q = mini_train(cfg);
    cfg.quantize = false;
    const auto f = mini_train(cfg);
    const double gap = std::abs(q.loss.back() - f.loss.back());
    const double elapsed = seconds_since(t0);
    return {gap <= 1e-3 && !q.diverged && q.loss.back() < q.loss.front() && elapsed < 120.0,
            fmt("final loss %.6f", q.loss.back()) + fmt(" vs %.6f", f.loss.back()) +
                fmt(", gap %.2e", gap) + fmt(", %.2f s", elapsed)};
}

// Loss-free schedules: every packet is delivered exactly once, in a random
// interleaving, to both switch variants.
Verdict ac9() {
    std::mt19937_64 rng(9);
    int mismatched = 0;
    std::uint64_t multicasts = 0;
    for (int run = 0; run < 100; ++run) {
        const auto n = static_cast<std::uint32_t>(1 + rng() % 8);
        const auto s = static_cast<std::uint32_t>(1 + rng() % 8);
        const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng() % 16);
        const std::size_t len = 1 + rng() % 600;
        AggregationSwitch reliable({n, s, k});
        AggregationSwitch lossless({n, s, k});
        std::vector<WorkerEngine> workers;
        std::deque<AggregationPacket> queue;
        const auto updates = oracle::random_updates(rng, n, len);
        for (std::uint32_t w = 0; w < n; ++w) {
            workers.emplace_back(WorkerConfig::contiguous(static_cast<std::uint16_t>(w), n, s, k));
            for (auto& p : workers.back().start_round(updates[w])) {
                queue.push_back(std::move(p));
            }
        }
        std::vector<AggregationPacket> seq_a;
        std::vector<AggregationPacket> seq_b;
        bool diverged = false;
        while (!queue.empty() && !diverged) {
            std::swap(queue.front(), queue[rng() % queue.size()]);
            const auto p = queue.front();
            queue.pop_front();
            const auto a = reliable.handle_packet(p);
            const auto b = lossless.handle_packet_lossless(p);
            if (a.kind != b.kind) {
                diverged = true;
                break;
            }
            if (a.kind == SwitchAction::Kind::kMulticast) {
                seq_a.push_back(a.packet);
                seq_b.push_back(b.packet);
                for (auto& w : workers) {
                    for (auto& next : w.on_result(a.packet)) {
                        queue.push_back(std::move(next));
                    }
                }
            }
        }
        const bool complete = std::all_of(workers.begin(), workers.end(),
                                          [](const WorkerEngine& w) { return w.done(); });
        if (diverged || !complete || seq_a != seq_b) {
            ++mismatched;
        }
        multicasts += seq_a.size();
    }
    return {mismatched == 0, "100 runs, " + std::to_string(multicasts) + " multicasts, " +
                                 std::to_string(mismatched) + " mismatched sequences"};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    bool write_golden = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else if (std::strcmp(argv[i], "--write-golden") == 0) {
            write_golden = true;
        } else {
            std::fprintf(stderr, "usage: %s [--only N] [--write-golden]\n", argv[0]);
            return 2;
        }
    }
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"golden trace", [&] { return ac1(write_golden); }},
        {"quantization examples", ac2},
        {"quantization error bound", ac3},
        {"protocol fuzz", ac4},
        {"loss inflation", ac5},
        {"pool size", ac6},
        {"communication cost", ac7},
        {"mini training", ac8},
        {"switch differential", ac9},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<std::size_t>(only) != i + 1) {
            continue;
        }
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("AC%zu %s %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                    v.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
