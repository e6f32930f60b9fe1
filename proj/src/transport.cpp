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

#include "switchagg/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <map>
#include <utility>

#include "switchagg/error.hpp"

namespace switchagg {
namespace {

[[noreturn]] void socket_error(const std::string& what) {
    throw Error(Errc::kSocketError, what + ": " + std::strerror(errno));
}

sockaddr_in to_sockaddr(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (ep.host.empty() || ep.host == "0.0.0.0" || ep.host == "*") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        return addr;
    }
    if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) {
        return addr;
    }
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    const int rc = getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
    if (rc != 0 || res == nullptr) {
        throw Error(Errc::kSocketError, "cannot resolve " + ep.host + ": " + gai_strerror(rc));
    }
    addr.sin_addr = reinterpret_cast<const sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

Endpoint from_sockaddr(const sockaddr_in& addr) {
    char buf[INET_ADDRSTRLEN] = {};
    inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
    return Endpoint{buf, ntohs(addr.sin_port)};
}

ControlMessage reply_to(const ControlMessage& m, ControlType type, RejectReason reason) {
    ControlMessage r = m;
    r.type = type;
    r.reason = reason;
    return r;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon + 1 == text.size()) {
        throw Error(Errc::kInvalidConfig, "endpoint must be host:port, got '" + std::string(text) + "'");
    }
    const auto port_text = text.substr(colon + 1);
    unsigned port = 0;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) {
        throw Error(Errc::kInvalidConfig, "bad port in '" + std::string(text) + "'");
    }
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    if (ep.host.empty()) {
        ep.host = "0.0.0.0";
    }
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

std::vector<Endpoint> parse_endpoints(std::string_view text) {
    std::vector<Endpoint> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = text.substr(0, comma);
        if (!item.empty()) {
            out.push_back(Endpoint::parse(item));
        }
        if (comma == std::string_view::npos) {
            break;
        }
        text.remove_prefix(comma + 1);
    }
    return out;
}

UdpSocket::UdpSocket(const Endpoint& bind_to) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) {
        socket_error("socket");
    }
    const int flags = ::fcntl(fd_, F_GETFL, 0);
    if (flags < 0 || ::fcntl(fd_, F_SETFL, flags | O_NONBLOCK) < 0) {
        ::close(fd_);
        socket_error("fcntl");
    }
    // Large buffers: a window of s frames can arrive in one burst.
    int bufsize = 4 << 20;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bufsize, sizeof bufsize);
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &bufsize, sizeof bufsize);
    const sockaddr_in addr = to_sockaddr(bind_to);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
        const int saved = errno;
        ::close(fd_);
        errno = saved;
        socket_error("bind " + bind_to.to_string());
    }
}

UdpSocket::~UdpSocket() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) {
            ::close(fd_);
        }
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

Endpoint UdpSocket::local() const {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
        socket_error("getsockname");
    }
    return from_sockaddr(addr);
}

void UdpSocket::send_frame(const Endpoint& to, std::span<const std::uint8_t> bytes) {
    const sockaddr_in addr = to_sockaddr(to);
    for (;;) {
        const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0,
                                reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
        if (n >= 0) {
            return;
        }
        if (errno == EINTR) {
            continue;
        }
        // A full send buffer is indistinguishable from loss; the protocol
        // retransmits.
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == ENOBUFS ||
            errno == ECONNREFUSED) {
            return;
        }
        socket_error("sendto " + to.to_string());
    }
}

std::vector<Datagram> UdpSocket::poll_frames(std::chrono::milliseconds wait,
                                             std::size_t max_frames) {
    std::vector<Datagram> out;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(wait.count()));
    if (rc < 0) {
        if (errno == EINTR) {
            return out;
        }
        socket_error("poll");
    }
    if (rc == 0) {
        return out;
    }
    std::uint8_t buf[65536];
    while (out.size() < max_frames) {
        sockaddr_in from{};
        socklen_t len = sizeof from;
        const auto n = ::recvfrom(fd_, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                break;
            }
            if (errno == EINTR || errno == ECONNREFUSED) {
                continue;  // a stale ICMP error for an earlier send
            }
            socket_error("recvfrom");
        }
        out.push_back(Datagram{from_sockaddr(from), {buf, buf + n}});
    }
    return out;
}

TimeNs steady_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

UdpSwitchServer::UdpSwitchServer(UdpSwitchConfig cfg)
    : cfg_(std::move(cfg)),
      socket_(cfg_.listen),
      switch_(SwitchConfig{cfg_.workers, cfg_.pool_size, cfg_.chunk}) {}

UdpSwitchStats UdpSwitchServer::serve(const std::atomic<bool>* stop) {
    UdpSwitchStats stats;
    const std::uint32_t n = cfg_.workers;
    std::vector<std::optional<Endpoint>> members(n);
    std::vector<bool> left(n, false);
    std::size_t joined = 0;
    std::size_t departed = 0;
    bool released = false;
    std::map<std::uint32_t, std::pair<std::uint64_t, std::uint64_t>> announced;
    const std::uint64_t f_bits = std::bit_cast<std::uint64_t>(cfg_.scaling_factor);
    auto last_activity = std::chrono::steady_clock::now();

    auto send_control = [&](const Endpoint& to, const ControlMessage& m) {
        socket_.send_frame(to, encode_control(m));
    };

    while (stop == nullptr || !stop->load()) {
        auto frames = socket_.poll_frames(std::chrono::milliseconds(50));
        const auto now = std::chrono::steady_clock::now();
        if (frames.empty()) {
            if (now - last_activity > cfg_.idle_timeout) {
                stats.idle_exit = true;
                break;
            }
            continue;
        }
        last_activity = now;
        for (auto& dg : frames) {
            ++stats.frames;
            if (is_control_frame(dg.bytes)) {
                const auto decoded = decode_control(dg.bytes);
                if (!decoded.ok()) {
                    ++stats.malformed;
                    continue;
                }
                const ControlMessage& m = decoded.message;
                if (m.wid >= n) {
                    ++stats.rejected;
                    send_control(dg.from, reply_to(m, ControlType::kReject,
                                                   RejectReason::kWorkerIdOutOfRange));
                    continue;
                }
                switch (m.type) {
                    case ControlType::kJoin: {
                        if (m.workers != n || m.pool_size != cfg_.pool_size ||
                            m.chunk != cfg_.chunk || m.value != f_bits) {
                            ++stats.rejected;
                            send_control(dg.from, reply_to(m, ControlType::kReject,
                                                           RejectReason::kConfigMismatch));
                            break;
                        }
                        if (!members[m.wid]) {
                            ++joined;
                        }
                        members[m.wid] = dg.from;
                        if (joined < n) {
                            break;
                        }
                        // The last join releases everyone; later ones are
                        // retransmissions and only need their own answer.
                        const bool release = !released;
                        released = true;
                        for (std::uint32_t w = 0; w < n; ++w) {
                            if (w == m.wid || release) {
                                ControlMessage accept = reply_to(m, ControlType::kAccept,
                                                                 RejectReason::kNone);
                                accept.wid = static_cast<std::uint16_t>(w);
                                send_control(*members[w], accept);
                            }
                        }
                        break;
                    }
                    case ControlType::kTensor: {
                        auto [it, inserted] =
                            announced.try_emplace(m.seq, std::make_pair(m.value, m.length));
                        if (inserted) {
                            ++stats.tensors;
                        }
                        if (it->second != std::make_pair(m.value, m.length)) {
                            ++stats.rejected;
                            send_control(dg.from, reply_to(m, ControlType::kReject,
                                                           RejectReason::kOrderMismatch));
                        } else {
                            send_control(dg.from,
                                         reply_to(m, ControlType::kAccept, RejectReason::kNone));
                        }
                        break;
                    }
                    case ControlType::kLeave:
                        if (!left[m.wid]) {
                            left[m.wid] = true;
                            ++departed;
                        }
                        break;
                    default:
                        ++stats.malformed;
                        break;
                }
                continue;
            }

            const auto decoded = decode_packet(dg.bytes, cfg_.chunk);
            if (!decoded.ok() || joined < n) {
                ++stats.malformed;
                continue;
            }
            SwitchAction action;
            try {
                action = switch_.handle_packet(decoded.packet);
            } catch (const Error&) {
                ++stats.malformed;
                continue;
            }
            if (action.kind == SwitchAction::Kind::kMulticast) {
                ++stats.multicasts;
                const auto bytes = encode_packet(action.packet, cfg_.chunk);
                for (const auto& ep : members) {
                    socket_.send_frame(*ep, bytes);
                }
            } else if (action.kind == SwitchAction::Kind::kUnicast) {
                ++stats.unicasts;
                socket_.send_frame(*members[action.dest], encode_packet(action.packet, cfg_.chunk));
            }
        }
        if (departed == n) {
            break;
        }
    }
    return stats;
}

UdpWorker::UdpWorker(UdpWorkerConfig cfg)
    : cfg_(std::move(cfg)),
      socket_(cfg_.bind),
      engine_([this] {
          WorkerConfig wc = WorkerConfig::contiguous(cfg_.wid, cfg_.workers, cfg_.pool_size,
                                                     cfg_.chunk);
          wc.timeout_ns = cfg_.timeout_ns;
          wc.max_retries = cfg_.max_retries;
          return wc;
      }()) {}

std::optional<ControlMessage> UdpWorker::await_control(ControlType expect, std::uint32_t seq) {
    for (const auto& dg : socket_.poll_frames(std::chrono::milliseconds(100))) {
        if (!is_control_frame(dg.bytes)) {
            continue;
        }
        const auto decoded = decode_control(dg.bytes);
        if (!decoded.ok() || decoded.message.seq != seq) {
            continue;
        }
        const ControlMessage& m = decoded.message;
        if (m.type == expect || m.type == ControlType::kReject) {
            return m;
        }
    }
    return std::nullopt;
}

namespace {

[[noreturn]] void throw_reject(const ControlMessage& m) {
    switch (m.reason) {
        case RejectReason::kOrderMismatch:
            throw Error(Errc::kOrderMismatch, "switch rejected tensor announcement " +
                                                  std::to_string(m.seq));
        case RejectReason::kWorkerIdOutOfRange:
            throw Error(Errc::kWorkerIdOutOfRange, "switch rejected worker id");
        default:
            throw Error(Errc::kConfigMismatch, "switch rejected configuration");
    }
}

}  // namespace

void UdpWorker::join() {
    ControlMessage m;
    m.type = ControlType::kJoin;
    m.wid = cfg_.wid;
    m.workers = static_cast<std::uint16_t>(cfg_.workers);
    m.pool_size = static_cast<std::uint16_t>(cfg_.pool_size);
    m.chunk = static_cast<std::uint16_t>(cfg_.chunk);
    m.seq = 0;
    m.value = std::bit_cast<std::uint64_t>(cfg_.scaling_factor);
    const auto bytes = encode_control(m);
    const auto give_up = std::chrono::steady_clock::now() + cfg_.handshake_timeout;
    while (std::chrono::steady_clock::now() < give_up) {
        socket_.send_frame(cfg_.switch_endpoint, bytes);
        if (auto reply = await_control(ControlType::kAccept, 0)) {
            if (reply->type == ControlType::kReject) {
                throw_reject(*reply);
            }
            joined_ = true;
            return;
        }
    }
    throw Error(Errc::kStalled, "no answer to join from " + cfg_.switch_endpoint.to_string());
}

std::vector<std::int32_t> UdpWorker::aggregate(std::uint64_t tensor_id,
                                               std::span<const std::int32_t> update) {
    if (!joined_) {
        throw Error(Errc::kInvalidConfig, "aggregate before join");
    }
    if (update.empty()) {
        throw Error(Errc::kEmptyUpdate, "tensor " + std::to_string(tensor_id) + " is empty");
    }
    ControlMessage m;
    m.type = ControlType::kTensor;
    m.wid = cfg_.wid;
    m.workers = static_cast<std::uint16_t>(cfg_.workers);
    m.pool_size = static_cast<std::uint16_t>(cfg_.pool_size);
    m.chunk = static_cast<std::uint16_t>(cfg_.chunk);
    m.seq = ++seq_;
    m.value = tensor_id;
    m.length = update.size();
    const auto announce = encode_control(m);
    const auto give_up = std::chrono::steady_clock::now() + cfg_.handshake_timeout;
    for (;;) {
        if (std::chrono::steady_clock::now() >= give_up) {
            throw Error(Errc::kStalled, "tensor announcement not acknowledged");
        }
        socket_.send_frame(cfg_.switch_endpoint, announce);
        if (auto reply = await_control(ControlType::kAccept, m.seq)) {
            if (reply->type == ControlType::kReject) {
                throw_reject(*reply);
            }
            break;
        }
    }

    auto send_all = [&](const std::vector<AggregationPacket>& packets) {
        for (const auto& p : packets) {
            socket_.send_frame(cfg_.switch_endpoint, encode_packet(p, cfg_.chunk));
        }
    };
    const auto deadline = std::chrono::steady_clock::now() + cfg_.round_timeout;
    try {
        send_all(engine_.start_round(update, steady_now_ns()));
        while (!engine_.done()) {
            if (std::chrono::steady_clock::now() >= deadline) {
                throw Error(Errc::kStalled, "tensor " + std::to_string(tensor_id) + " timed out");
            }
            std::chrono::milliseconds wait{1};
            if (const auto next = engine_.next_deadline()) {
                const auto remaining = (*next - steady_now_ns()) / 1'000'000;
                wait = std::chrono::milliseconds(std::clamp<TimeNs>(remaining, 0, 100));
            }
            for (const auto& dg : socket_.poll_frames(wait)) {
                if (is_control_frame(dg.bytes)) {
                    const auto decoded = decode_control(dg.bytes);
                    if (decoded.ok() && decoded.message.type == ControlType::kReject &&
                        decoded.message.seq == m.seq) {
                        throw_reject(decoded.message);
                    }
                    continue;
                }
                const auto decoded = decode_packet(dg.bytes, cfg_.chunk);
                if (!decoded.ok()) {
                    continue;
                }
                send_all(engine_.on_result(decoded.packet, steady_now_ns()));
            }
            if (!engine_.done()) {
                send_all(engine_.on_timeout(steady_now_ns()));
            }
        }
    } catch (const Error& e) {
        if (e.code() == Errc::kRetriesExhausted) {
            throw Error(Errc::kStalled, e.what());
        }
        throw;
    }
    return engine_.result();
}

void UdpWorker::leave() {
    ControlMessage m;
    m.type = ControlType::kLeave;
    m.wid = cfg_.wid;
    m.workers = static_cast<std::uint16_t>(cfg_.workers);
    m.seq = seq_;
    const auto bytes = encode_control(m);
    // LEAVE is not acknowledged; a few copies make loss unlikely and the
    // switch's idle timeout covers the rest.
    for (int i = 0; i < 3; ++i) {
        socket_.send_frame(cfg_.switch_endpoint, bytes);
    }
}

}  // namespace switchagg
