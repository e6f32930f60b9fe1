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
 * @file transport.hpp
 * @brief Real datagram transport: UDP sockets, a software switch endpoint and
 * a worker endpoint.
 *
 * Datagram payloads are exactly the wire-format frames. Before any data,
 * every worker sends JOIN carrying (wid, n, s, k, f); the switch answers
 * ACCEPT to everyone once all n workers have joined with identical
 * parameters and REJECT(config mismatch) otherwise. Each tensor is announced
 * with TENSOR(seq, id, length); the switch answers ACCEPT if it matches what
 * the other workers announced for that seq and REJECT(order mismatch) if not.
 */

#ifndef SWITCHAGG_TRANSPORT_HPP_
#define SWITCHAGG_TRANSPORT_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "switchagg/switch.hpp"
#include "switchagg/worker.hpp"

namespace switchagg {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    /// "host:port"; throws Error(kInvalidConfig).
    static Endpoint parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const Endpoint&) const = default;
};

/// Comma-separated host:port list.
std::vector<Endpoint> parse_endpoints(std::string_view text);

struct Datagram {
    Endpoint from;
    std::vector<std::uint8_t> bytes;
};

/// Non-blocking IPv4 UDP socket. Errors raise Error(kSocketError).
class UdpSocket {
  public:
    /// Port 0 binds an ephemeral port.
    explicit UdpSocket(const Endpoint& bind_to);
    ~UdpSocket();
    UdpSocket(UdpSocket&& other) noexcept;
    UdpSocket& operator=(UdpSocket&& other) noexcept;
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    Endpoint local() const;

    void send_frame(const Endpoint& to, std::span<const std::uint8_t> bytes);

    /// Waits up to `wait` for the first datagram, then drains what is queued
    /// (at most `max_frames`).
    std::vector<Datagram> poll_frames(std::chrono::milliseconds wait, std::size_t max_frames = 256);

  private:
    int fd_ = -1;
};

struct UdpSwitchConfig {
    Endpoint listen;
    std::uint32_t workers = 2;
    std::uint32_t pool_size = 128;
    std::uint32_t chunk = kDefaultChunk;
    double scaling_factor = 1.0;
    /// serve() returns after this long without any datagram.
    std::chrono::milliseconds idle_timeout{30'000};
};

struct UdpSwitchStats {
    std::uint64_t frames = 0;
    std::uint64_t malformed = 0;
    std::uint64_t rejected = 0;
    std::uint64_t multicasts = 0;
    std::uint64_t unicasts = 0;
    std::uint64_t tensors = 0;
    bool idle_exit = false;
};

class UdpSwitchServer {
  public:
    explicit UdpSwitchServer(UdpSwitchConfig cfg);

    Endpoint local() const { return socket_.local(); }

    /// Runs until every worker has sent LEAVE, the idle timeout expires, or
    /// `stop` becomes true.
    UdpSwitchStats serve(const std::atomic<bool>* stop = nullptr);

  private:
    UdpSwitchConfig cfg_;
    UdpSocket socket_;
    AggregationSwitch switch_;
};

struct UdpWorkerConfig {
    Endpoint switch_endpoint;
    Endpoint bind{"0.0.0.0", 0};
    std::uint16_t wid = 0;
    std::uint32_t workers = 2;
    std::uint32_t pool_size = 128;
    std::uint32_t chunk = kDefaultChunk;
    double scaling_factor = 1.0;
    TimeNs timeout_ns = kDefaultTimeoutNs;
    std::optional<std::uint32_t> max_retries;
    /// Give up on JOIN / TENSOR acknowledgement after this long.
    std::chrono::milliseconds handshake_timeout{10'000};
    /// Give up on a tensor after this long.
    std::chrono::milliseconds round_timeout{60'000};
};

class UdpWorker {
  public:
    explicit UdpWorker(UdpWorkerConfig cfg);

    /// JOIN handshake. Throws Error(kConfigMismatch / kWorkerIdOutOfRange /
    /// kStalled).
    void join();

    /// Aggregated integer sum of one tensor across workers. The worker's
    /// engine persists, so successive calls form one stream.
    /// Throws Error(kOrderMismatch / kStalled / kEmptyUpdate).
    std::vector<std::int32_t> aggregate(std::uint64_t tensor_id,
                                        std::span<const std::int32_t> update);

    void leave();

    const WorkerEngine& engine() const noexcept { return engine_; }
    const UdpWorkerConfig& config() const noexcept { return cfg_; }

  private:
    std::optional<ControlMessage> await_control(ControlType expect, std::uint32_t seq);

    UdpWorkerConfig cfg_;
    UdpSocket socket_;
    WorkerEngine engine_;
    std::uint32_t seq_ = 0;
    bool joined_ = false;
};

/// Monotonic nanoseconds for driving a WorkerEngine in real time.
TimeNs steady_now_ns();

}  // namespace switchagg

#endif  // SWITCHAGG_TRANSPORT_HPP_
