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

// switchagg command line: simulator experiments and UDP endpoints.
//
// Exit codes: 0 success, 2 protocol stall, 3 configuration error,
// 1 anything else (socket failures, I/O).

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "switchagg/bench.hpp"
#include "switchagg/collective.hpp"
#include "switchagg/error.hpp"
#include "switchagg/netsim.hpp"
#include "switchagg/quant.hpp"
#include "switchagg/transport.hpp"

namespace {

using namespace switchagg;
using json = nlohmann::ordered_json;

struct Common {
    std::uint32_t workers = 4;
    std::uint32_t pool_size = 128;
    std::uint32_t chunk = kDefaultChunk;
    double loss = 0.0;
    double dup = 0.0;
    std::uint64_t seed = 1;
    double timeout_us = 1000.0;
    std::uint64_t tensor_bytes = 1 << 20;
    double scaling_factor = 0.0;  // 0: overflow-safe value for |x| <= 1
    std::string format = "csv";
    std::string out;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--workers", c.workers, "number of workers n")->check(CLI::Range(1, 64));
    app->add_option("--pool-size", c.pool_size, "switch slots s")->check(CLI::Range(1, 65536));
    app->add_option("--chunk", c.chunk, "elements per packet k")->check(CLI::PositiveNumber);
    app->add_option("--loss", c.loss, "per-frame loss probability")->check(CLI::Range(0.0, 1.0));
    app->add_option("--dup", c.dup, "per-frame duplication probability")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", c.seed, "RNG seed");
    app->add_option("--timeout-us", c.timeout_us, "retransmission timeout")->check(CLI::PositiveNumber);
    app->add_option("--tensor-bytes", c.tensor_bytes, "tensor size per worker")->check(CLI::PositiveNumber);
    app->add_option("--scaling-factor", c.scaling_factor, "fixed-point scaling factor f");
    app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--out", c.out, "write output to FILE instead of stdout");
}

TimeNs timeout_ns(const Common& c) { return static_cast<TimeNs>(std::llround(c.timeout_us * 1000.0)); }

void emit(const Common& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out);
    if (!f) {
        throw std::runtime_error("cannot open " + c.out);
    }
    f << text;
}

// Deterministic tensor of worker w: every endpoint can rebuild everyone's
// input, so UDP workers can check their result against the exact sum.
std::vector<double> synthetic_tensor(std::uint64_t seed, std::uint32_t w, std::uint64_t tensor,
                                     std::size_t len) {
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (w + 1)) ^ (tensor << 32));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> v(len);
    for (auto& x : v) {
        x = unit(rng);
    }
    return v;
}

double scaling_for(const Common& c) {
    return c.scaling_factor > 0.0 ? c.scaling_factor : choose_scaling_factor(c.workers, 1.0);
}

std::string metrics_csv_header() {
    return "tat_ns,elements,ate_per_sec,sends,retransmissions,drops,dups,corruptions,ignored,"
           "multicasts,unicasts,stale_results";
}

std::string metrics_csv_row(const RunMetrics& m) {
    std::ostringstream os;
    os << m.tat_ns << ',' << m.elements << ',' << m.ate_per_sec << ',' << m.sends << ','
       << m.retransmissions << ',' << m.drops << ',' << m.dups << ',' << m.corruptions << ','
       << m.ignored << ',' << m.multicasts << ',' << m.unicasts << ',' << m.stale_results;
    return os.str();
}

json metrics_json(const RunMetrics& m) {
    return json{{"tat_ns", m.tat_ns},           {"elements", m.elements},
                {"ate_per_sec", m.ate_per_sec}, {"sends", m.sends},
                {"retransmissions", m.retransmissions}, {"drops", m.drops},
                {"dups", m.dups},               {"corruptions", m.corruptions},
                {"ignored", m.ignored},         {"multicasts", m.multicasts},
                {"unicasts", m.unicasts},       {"stale_results", m.stale_results}};
}

int run_simulate(const Common& c, const std::string& trace_path) {
    SimConfig sc;
    sc.workers = c.workers;
    sc.pool_size = c.pool_size;
    sc.chunk = c.chunk;
    sc.timeout_ns = timeout_ns(c);
    sc.channel.loss_prob = c.loss;
    sc.channel.dup_prob = c.dup;
    sc.seed = c.seed;
    sc.record_trace = !trace_path.empty();
    const std::size_t len = std::max<std::uint64_t>(1, c.tensor_bytes / 4);
    std::vector<std::vector<double>> updates;
    for (std::uint32_t w = 0; w < c.workers; ++w) {
        updates.push_back(synthetic_tensor(c.seed, w, 0, len));
    }
    const double f = scaling_for(c);
    const auto result = run_simulation(sc, updates, QuantConfig{f, c.workers, 1.0});

    double max_err = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        double exact = 0.0;
        for (const auto& u : updates) {
            exact += u[i];
        }
        for (const auto& r : result.results) {
            max_err = std::max(max_err, std::abs(r[i] - exact));
        }
    }
    if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        t << result.trace.to_jsonl();
    }
    if (c.format == "json") {
        json j = metrics_json(result.metrics);
        j["scaling_factor"] = f;
        j["max_abs_error"] = max_err;
        j["error_bound"] = aggregation_error_bound(c.workers, f);
        j["phase_lag_violations"] = result.phase_lag_violations;
        emit(c, j.dump() + "\n");
    } else {
        std::ostringstream os;
        os << metrics_csv_header() << ",scaling_factor,max_abs_error,error_bound\n"
           << metrics_csv_row(result.metrics) << ',' << f << ',' << max_err << ','
           << aggregation_error_bound(c.workers, f) << '\n';
        emit(c, os.str());
    }
    return 0;
}

int run_bench(const Common& c, std::uint32_t repeats) {
    MicrobenchConfig mc;
    mc.workers = c.workers;
    mc.pool_size = c.pool_size;
    mc.chunk = c.chunk;
    mc.tensor_bytes = c.tensor_bytes;
    mc.loss_prob = c.loss;
    mc.dup_prob = c.dup;
    mc.seed = c.seed;
    mc.repeats = repeats;
    mc.timeout_ns = timeout_ns(c);
    const auto r = run_microbenchmark(mc);
    if (c.format == "json") {
        std::string text;
        for (const auto& m : r.runs) {
            text += metrics_json(m).dump() + "\n";
        }
        text += json{{"median_tat_ns", r.median_tat_ns},
                     {"median_ate_per_sec", r.median_ate_per_sec},
                     {"verified", r.verified}}
                    .dump() +
                "\n";
        emit(c, text);
    } else {
        emit(c, microbench_csv(mc, r));
    }
    return r.verified ? 0 : 1;
}

int run_timeline(const Common& c) {
    TimelineConfig tc;
    tc.workers = c.workers;
    tc.pool_size = c.pool_size;
    tc.chunk = c.chunk;
    tc.tensor_bytes = c.tensor_bytes;
    tc.loss_prob = c.loss;
    tc.seed = c.seed;
    tc.timeout_ns = timeout_ns(c);
    const auto t = loss_timeline(tc);
    if (c.format == "json") {
        std::string text;
        for (std::size_t b = 0; b < (t.bins.empty() ? 0 : t.bins.front().size()); ++b) {
            json row{{"bin", b}, {"start_ms", static_cast<double>(b) * t.bin_ns / 1e6}};
            std::uint64_t total = 0;
            for (std::size_t w = 0; w < t.bins.size(); ++w) {
                row["w" + std::to_string(w)] = t.bins[w][b];
                total += t.bins[w][b];
            }
            row["total"] = total;
            text += row.dump() + "\n";
        }
        emit(c, text);
    } else {
        emit(c, t.to_csv());
    }
    return 0;
}

int run_cost(const Common& c, const std::string& strategy) {
    std::vector<CommStrategy> strategies{CommStrategy::kRingAllReduce, CommStrategy::kInNetwork,
                                         CommStrategy::kDedicatedPs};
    if (!strategy.empty()) {
        const auto s = parse_strategy(strategy);
        if (!s) {
            throw Error(Errc::kInvalidConfig, "unknown strategy '" + strategy + "'");
        }
        strategies = {*s};
    }
    std::ostringstream os;
    if (c.format == "csv") {
        os << "strategy,workers,update_bytes,bytes_per_worker,machines\n";
    }
    for (const auto s : strategies) {
        const double bytes = comm_cost(s, c.workers, static_cast<double>(c.tensor_bytes));
        // A dedicated parameter server needs as many server machines as workers.
        const std::uint32_t machines = s == CommStrategy::kDedicatedPs ? 2 * c.workers : c.workers;
        if (c.format == "json") {
            os << json{{"strategy", to_string(s)}, {"workers", c.workers},
                       {"update_bytes", c.tensor_bytes}, {"bytes_per_worker", bytes},
                       {"machines", machines}}
                      .dump()
               << '\n';
        } else {
            os << to_string(s) << ',' << c.workers << ',' << c.tensor_bytes << ',' << bytes << ','
               << machines << '\n';
        }
    }
    emit(c, os.str());
    return 0;
}

int run_train(const Common& c, std::uint32_t epochs, bool no_quant, double multiplier) {
    TrainConfig tc;
    tc.workers = c.workers;
    tc.epochs = epochs;
    tc.seed = c.seed;
    tc.quantize = !no_quant;
    tc.scaling_multiplier = multiplier;
    tc.loss_prob = c.loss;
    const auto r = mini_train(tc);
    std::ostringstream os;
    if (c.format == "json") {
        for (std::size_t e = 0; e < r.loss.size(); ++e) {
            os << json{{"epoch", e}, {"loss", r.loss[e]}}.dump() << '\n';
        }
        os << json{{"scaling_factor", r.scaling_factor}, {"diverged", r.diverged},
                   {"stalled", r.stalled}}
                  .dump()
           << '\n';
    } else {
        os.precision(12);
        os << "epoch,loss\n";
        for (std::size_t e = 0; e < r.loss.size(); ++e) {
            os << e << ',' << r.loss[e] << '\n';
        }
    }
    emit(c, os.str());
    if (r.diverged) {
        std::cerr << "training diverged\n";
    }
    if (r.stalled) {
        std::cerr << "training stalled: updates quantize to zero\n";
    }
    return 0;
}

int run_tune(const Common& c, double bdp, double gbps, double rtt_us, double frame) {
    if (bdp <= 0.0) {
        bdp = gbps * 1e9 / 8.0 * rtt_us * 1e-6;
    }
    const auto s = tune_pool_size(bdp, frame);
    std::ostringstream os;
    if (c.format == "json") {
        os << json{{"bdp_bytes", bdp}, {"frame_bytes", frame}, {"pool_size", s}}.dump() << '\n';
    } else {
        os << "bdp_bytes,frame_bytes,pool_size\n" << bdp << ',' << frame << ',' << s << '\n';
    }
    emit(c, os.str());
    return 0;
}

int run_udp_switch(const Common& c, const std::string& listen, std::uint32_t idle_ms) {
    UdpSwitchConfig sc;
    sc.listen = Endpoint::parse(listen);
    sc.workers = c.workers;
    sc.pool_size = c.pool_size;
    sc.chunk = c.chunk;
    sc.scaling_factor = scaling_for(c);
    sc.idle_timeout = std::chrono::milliseconds(idle_ms);
    UdpSwitchServer server(sc);
    std::cerr << "switch listening on " << server.local().to_string() << '\n';
    const auto stats = server.serve();
    std::ostringstream os;
    os << "frames,malformed,rejected,multicasts,unicasts,tensors,idle_exit\n"
       << stats.frames << ',' << stats.malformed << ',' << stats.rejected << ','
       << stats.multicasts << ',' << stats.unicasts << ',' << stats.tensors << ','
       << stats.idle_exit << '\n';
    emit(c, os.str());
    return 0;
}

int run_udp_worker(const Common& c, const std::string& listen, const std::string& peers,
                   std::uint16_t wid, std::uint32_t tensors) {
    const auto endpoints = parse_endpoints(peers);
    if (endpoints.size() != 1) {
        throw Error(Errc::kInvalidConfig, "--peers must name exactly one switch endpoint");
    }
    UdpWorkerConfig wc;
    wc.switch_endpoint = endpoints.front();
    if (!listen.empty()) {
        wc.bind = Endpoint::parse(listen);
    }
    wc.wid = wid;
    wc.workers = c.workers;
    wc.pool_size = c.pool_size;
    wc.chunk = c.chunk;
    wc.scaling_factor = scaling_for(c);
    wc.timeout_ns = timeout_ns(c);
    UdpCollective coll(wc, Reduction::kSum);
    coll.register_worker();

    const std::size_t len = std::max<std::uint64_t>(1, c.tensor_bytes / 4);
    std::ostringstream os;
    os << "tensor,elements,max_abs_error,error_bound,ms\n";
    for (std::uint32_t t = 0; t < tensors; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const auto out = coll.all_reduce(Tensor{t, synthetic_tensor(c.seed, wid, t, len)});
        const auto ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        std::vector<double> exact(len, 0.0);
        for (std::uint32_t w = 0; w < c.workers; ++w) {
            const auto u = synthetic_tensor(c.seed, w, t, len);
            for (std::size_t i = 0; i < len; ++i) {
                exact[i] += u[i];
            }
        }
        double err = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            err = std::max(err, std::abs(out[i] - exact[i]));
        }
        os << t << ',' << len << ',' << err << ','
           << aggregation_error_bound(c.workers, wc.scaling_factor) << ',' << ms << '\n';
    }
    coll.shutdown();
    emit(c, os.str());
    return 0;
}

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::kStalled:
        case Errc::kRetriesExhausted:
            return 2;
        case Errc::kSocketError:
            return 1;
        default:
            return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SwitchML-style in-network aggregation: simulator, benchmarks and UDP endpoints"};
    app.require_subcommand(1);
    Common c;

    auto* simulate = app.add_subcommand("simulate", "aggregate one random tensor per worker");
    add_common(simulate, c);
    std::string trace_path;
    simulate->add_option("--trace", trace_path, "write the event trace as JSON lines");

    auto* bench = app.add_subcommand("bench", "TAT/ATE of back-to-back all-ones tensors");
    add_common(bench, c);
    std::uint32_t repeats = 5;
    bench->add_option("--repeats", repeats, "tensors to aggregate")->check(CLI::PositiveNumber);

    auto* timeline = app.add_subcommand("timeline", "packets sent per 10 ms window");
    add_common(timeline, c);

    auto* cost = app.add_subcommand("cost", "bytes per worker by all-reduce strategy");
    add_common(cost, c);
    std::string strategy;
    cost->add_option("--strategy", strategy, "ring_allreduce | in_network | dedicated_ps");

    auto* train = app.add_subcommand("train", "distributed logistic regression demo");
    add_common(train, c);
    std::uint32_t epochs = 20;
    bool no_quant = false;
    double multiplier = 1.0;
    train->add_option("--epochs", epochs, "training epochs")->check(CLI::PositiveNumber);
    train->add_flag("--no-quant", no_quant, "aggregate exactly in floating point");
    train->add_option("--f-multiplier", multiplier, "scale the overflow-safe f");

    auto* tune = app.add_subcommand("tune", "pool size for a bandwidth-delay product");
    add_common(tune, c);
    double bdp = 0.0, gbps = 10.0, rtt_us = 10.0, frame = 180.0;
    tune->add_option("--bdp-bytes", bdp, "bandwidth-delay product (overrides --gbps/--rtt-us)");
    tune->add_option("--gbps", gbps, "link rate");
    tune->add_option("--rtt-us", rtt_us, "round-trip time");
    tune->add_option("--frame-bytes", frame, "bytes per packet on the wire");

    auto* udp_switch = app.add_subcommand("udp-switch", "run the software switch endpoint");
    add_common(udp_switch, c);
    std::string listen = "0.0.0.0:9000";
    std::uint32_t idle_ms = 30000;
    udp_switch->add_option("--listen", listen, "host:port to bind");
    udp_switch->add_option("--idle-ms", idle_ms, "exit after this long without traffic");

    auto* udp_worker = app.add_subcommand("udp-worker", "run one worker endpoint");
    add_common(udp_worker, c);
    std::string worker_listen;
    std::string peers;
    std::uint16_t wid = 0;
    std::uint32_t tensors = 1;
    udp_worker->add_option("--listen", worker_listen, "host:port to bind (default ephemeral)");
    udp_worker->add_option("--peers", peers, "switch host:port")->required();
    udp_worker->add_option("--wid", wid, "worker id");
    udp_worker->add_option("--tensors", tensors, "tensors to all-reduce");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    try {
        if (*simulate) return run_simulate(c, trace_path);
        if (*bench) return run_bench(c, repeats);
        if (*timeline) return run_timeline(c);
        if (*cost) return run_cost(c, strategy);
        if (*train) return run_train(c, epochs, no_quant, multiplier);
        if (*tune) return run_tune(c, bdp, gbps, rtt_us, frame);
        if (*udp_switch) return run_udp_switch(c, listen, idle_ms);
        if (*udp_worker) return run_udp_worker(c, worker_listen, peers, wid, tensors);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
