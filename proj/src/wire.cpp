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

#include "switchagg/wire.hpp"

#include <string>

#include "switchagg/error.hpp"

namespace switchagg {
namespace {

constexpr std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int bit = 0; bit < 8; ++bit) {
            c = (c & 1U) ? (0xEDB88320U ^ (c >> 1)) : (c >> 1);
        }
        table[i] = c;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

void put16(std::uint8_t* out, std::uint16_t v) {
    out[0] = static_cast<std::uint8_t>(v >> 8);
    out[1] = static_cast<std::uint8_t>(v);
}

void put32(std::uint8_t* out, std::uint32_t v) {
    out[0] = static_cast<std::uint8_t>(v >> 24);
    out[1] = static_cast<std::uint8_t>(v >> 16);
    out[2] = static_cast<std::uint8_t>(v >> 8);
    out[3] = static_cast<std::uint8_t>(v);
}

void put64(std::uint8_t* out, std::uint64_t v) {
    put32(out, static_cast<std::uint32_t>(v >> 32));
    put32(out + 4, static_cast<std::uint32_t>(v));
}

std::uint16_t get16(const std::uint8_t* in) {
    return static_cast<std::uint16_t>((in[0] << 8) | in[1]);
}

std::uint32_t get32(const std::uint8_t* in) {
    return (static_cast<std::uint32_t>(in[0]) << 24) | (static_cast<std::uint32_t>(in[1]) << 16) |
           (static_cast<std::uint32_t>(in[2]) << 8) | static_cast<std::uint32_t>(in[3]);
}

std::uint64_t get64(const std::uint8_t* in) {
    return (static_cast<std::uint64_t>(get32(in)) << 32) | get32(in + 4);
}

bool has_magic(std::span<const std::uint8_t> buf, const std::array<std::uint8_t, 2>& magic) {
    return buf.size() >= 2 && buf[0] == magic[0] && buf[1] == magic[1];
}

}  // namespace

std::uint32_t compute_checksum(std::span<const std::uint8_t> bytes) noexcept {
    std::uint32_t crc = 0xFFFFFFFFU;
    for (std::uint8_t b : bytes) {
        crc = kCrcTable[(crc ^ b) & 0xFFU] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFU;
}

std::vector<std::uint8_t> encode_packet(const AggregationPacket& p, std::size_t k) {
    if (p.vector.size() != k) {
        throw Error(Errc::kInvalidPacket, "vector has " + std::to_string(p.vector.size()) +
                                              " elements, expected " + std::to_string(k));
    }
    if (p.ver > 1) {
        throw Error(Errc::kInvalidPacket, "pool version must be 0 or 1");
    }
    std::vector<std::uint8_t> frame(frame_size(k));
    std::uint8_t* out = frame.data();
    out[0] = kDataMagic[0];
    out[1] = kDataMagic[1];
    out[2] = p.ver;
    put16(out + 3, p.wid);
    put16(out + 5, p.idx);
    put32(out + 7, p.off);
    out += kDataHeaderBytes;
    for (std::int32_t v : p.vector) {
        put32(out, static_cast<std::uint32_t>(v));
        out += 4;
    }
    const std::size_t body = frame.size() - kChecksumBytes;
    put32(out, compute_checksum(std::span(frame.data(), body)));
    return frame;
}

DecodedPacket decode_packet(std::span<const std::uint8_t> buf, std::size_t k) {
    DecodedPacket result;
    if (buf.size() != frame_size(k)) {
        result.status = DecodeStatus::kBadLength;
        return result;
    }
    if (!has_magic(buf, kDataMagic)) {
        result.status = DecodeStatus::kBadMagic;
        return result;
    }
    const std::size_t body = buf.size() - kChecksumBytes;
    if (compute_checksum(buf.first(body)) != get32(buf.data() + body)) {
        result.status = DecodeStatus::kBadChecksum;
        return result;
    }
    const std::uint8_t flags = buf[2];
    if ((flags & ~0x01U) != 0) {
        result.status = DecodeStatus::kBadFlags;
        return result;
    }
    AggregationPacket& p = result.packet;
    p.ver = flags & 0x01U;
    p.wid = get16(buf.data() + 3);
    p.idx = get16(buf.data() + 5);
    p.off = get32(buf.data() + 7);
    p.vector.resize(k);
    const std::uint8_t* in = buf.data() + kDataHeaderBytes;
    for (std::size_t i = 0; i < k; ++i, in += 4) {
        p.vector[i] = static_cast<std::int32_t>(get32(in));
    }
    result.status = DecodeStatus::kOk;
    return result;
}

const char* to_string(DecodeStatus status) noexcept {
    switch (status) {
        case DecodeStatus::kOk: return "ok";
        case DecodeStatus::kBadMagic: return "bad-magic";
        case DecodeStatus::kBadLength: return "bad-length";
        case DecodeStatus::kBadChecksum: return "bad-checksum";
        case DecodeStatus::kBadFlags: return "bad-flags";
    }
    return "unknown";
}

std::vector<std::uint8_t> encode_control(const ControlMessage& m) {
    std::vector<std::uint8_t> frame(kControlFrameBytes);
    std::uint8_t* out = frame.data();
    out[0] = kControlMagic[0];
    out[1] = kControlMagic[1];
    out[2] = static_cast<std::uint8_t>(m.type);
    out[3] = static_cast<std::uint8_t>(m.reason);
    put16(out + 4, m.wid);
    put16(out + 6, m.workers);
    put16(out + 8, m.pool_size);
    put16(out + 10, m.chunk);
    put32(out + 12, m.seq);
    put64(out + 16, m.value);
    put64(out + 24, m.length);
    put32(out + 32, compute_checksum(std::span(frame.data(), 32)));
    return frame;
}

DecodedControl decode_control(std::span<const std::uint8_t> buf) {
    DecodedControl result;
    if (buf.size() != kControlFrameBytes) {
        result.status = DecodeStatus::kBadLength;
        return result;
    }
    if (!has_magic(buf, kControlMagic)) {
        result.status = DecodeStatus::kBadMagic;
        return result;
    }
    if (compute_checksum(buf.first(32)) != get32(buf.data() + 32)) {
        result.status = DecodeStatus::kBadChecksum;
        return result;
    }
    const std::uint8_t type = buf[2];
    if (type < static_cast<std::uint8_t>(ControlType::kJoin) ||
        type > static_cast<std::uint8_t>(ControlType::kLeave)) {
        result.status = DecodeStatus::kBadFlags;
        return result;
    }
    ControlMessage& m = result.message;
    m.type = static_cast<ControlType>(type);
    m.reason = static_cast<RejectReason>(buf[3]);
    m.wid = get16(buf.data() + 4);
    m.workers = get16(buf.data() + 6);
    m.pool_size = get16(buf.data() + 8);
    m.chunk = get16(buf.data() + 10);
    m.seq = get32(buf.data() + 12);
    m.value = get64(buf.data() + 16);
    m.length = get64(buf.data() + 24);
    result.status = DecodeStatus::kOk;
    return result;
}

bool is_control_frame(std::span<const std::uint8_t> buf) noexcept {
    return has_magic(buf, kControlMagic);
}

}  // namespace switchagg
