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
 * @file wire.hpp
 * @brief Datagram formats exchanged between workers and the switch.
 *
 * Data frame (all multi-byte fields big-endian):
 *
 *   offset  size  field
 *   0       2     magic 0x5A 0x4D
 *   2       1     flags (bit0 = pool version, other bits zero)
 *   3       2     wid
 *   5       2     idx
 *   7       4     off
 *   11      4k    payload, k two's-complement int32
 *   11+4k   4     CRC-32 of bytes [0, 11+4k)
 *
 * Control frame (join handshake, tensor announcements, leave):
 *
 *   0  2  magic 0x5A 0x43
 *   2  1  type
 *   3  1  reason (reject only)
 *   4  2  wid
 *   6  2  n
 *   8  2  s
 *   10 2  k
 *   12 4  seq
 *   16 8  value (scaling factor bits for join, tensor id for tensor)
 *   24 8  length (tensor element count)
 *   32 4  CRC-32 of bytes [0, 32)
 */

#ifndef SWITCHAGG_WIRE_HPP_
#define SWITCHAGG_WIRE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace switchagg {

inline constexpr std::size_t kDefaultChunk = 32;
inline constexpr std::array<std::uint8_t, 2> kDataMagic{0x5A, 0x4D};
inline constexpr std::array<std::uint8_t, 2> kControlMagic{0x5A, 0x43};
inline constexpr std::size_t kDataHeaderBytes = 11;
inline constexpr std::size_t kChecksumBytes = 4;
inline constexpr std::size_t kControlFrameBytes = 36;

constexpr std::size_t frame_size(std::size_t k) noexcept {
    return kDataHeaderBytes + 4 * k + kChecksumBytes;
}

/** One update (worker to switch) or result (switch to worker). */
struct AggregationPacket {
    std::uint16_t wid = 0;
    std::uint8_t ver = 0;
    std::uint16_t idx = 0;
    std::uint32_t off = 0;
    std::vector<std::int32_t> vector;

    bool operator==(const AggregationPacket&) const = default;
};

/** CRC-32 (IEEE 802.3, reflected, init and final xor 0xFFFFFFFF). */
std::uint32_t compute_checksum(std::span<const std::uint8_t> bytes) noexcept;

/// Throws Error(kInvalidPacket) if the vector length differs from k or ver > 1.
std::vector<std::uint8_t> encode_packet(const AggregationPacket& p, std::size_t k);

enum class DecodeStatus { kOk, kBadMagic, kBadLength, kBadChecksum, kBadFlags };

struct DecodedPacket {
    DecodeStatus status = DecodeStatus::kBadLength;
    AggregationPacket packet;

    bool ok() const noexcept { return status == DecodeStatus::kOk; }
};

/// Never throws; malformed frames are reported through the status.
DecodedPacket decode_packet(std::span<const std::uint8_t> buf, std::size_t k);

const char* to_string(DecodeStatus status) noexcept;

enum class ControlType : std::uint8_t {
    kJoin = 1,
    kAccept = 2,
    kReject = 3,
    kTensor = 4,
    kLeave = 5,
};

enum class RejectReason : std::uint8_t {
    kNone = 0,
    kConfigMismatch = 1,
    kOrderMismatch = 2,
    kWorkerIdOutOfRange = 3,
};

struct ControlMessage {
    ControlType type = ControlType::kJoin;
    RejectReason reason = RejectReason::kNone;
    std::uint16_t wid = 0;
    std::uint16_t workers = 0;
    std::uint16_t pool_size = 0;
    std::uint16_t chunk = 0;
    std::uint32_t seq = 0;
    std::uint64_t value = 0;
    std::uint64_t length = 0;

    bool operator==(const ControlMessage&) const = default;
};

std::vector<std::uint8_t> encode_control(const ControlMessage& m);

struct DecodedControl {
    DecodeStatus status = DecodeStatus::kBadLength;
    ControlMessage message;

    bool ok() const noexcept { return status == DecodeStatus::kOk; }
};

DecodedControl decode_control(std::span<const std::uint8_t> buf);

bool is_control_frame(std::span<const std::uint8_t> buf) noexcept;

}  // namespace switchagg

#endif  // SWITCHAGG_WIRE_HPP_
