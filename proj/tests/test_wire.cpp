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
#include <zlib.h>

#include <bit>
#include <random>
#include <string_view>

#include "oracles.hpp"
#include "switchagg/error.hpp"
#include "switchagg/wire.hpp"

using namespace switchagg;

namespace {

std::span<const std::uint8_t> bytes_of(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

AggregationPacket random_packet(std::mt19937_64& rng, std::size_t k) {
    AggregationPacket p;
    p.wid = static_cast<std::uint16_t>(rng());
    p.ver = static_cast<std::uint8_t>(rng() & 1);
    p.idx = static_cast<std::uint16_t>(rng());
    p.off = static_cast<std::uint32_t>(rng()) / static_cast<std::uint32_t>(k) *
            static_cast<std::uint32_t>(k);
    p.vector.resize(k);
    for (auto& v : p.vector) {
        v = static_cast<std::int32_t>(rng());
    }
    return p;
}

std::uint32_t zlib_crc(std::span<const std::uint8_t> b) {
    return static_cast<std::uint32_t>(crc32(0L, b.data(), static_cast<uInt>(b.size())));
}

}  // namespace

TEST_CASE("checksum of the empty string and the standard check input") {
    CHECK(compute_checksum({}) == 0x00000000u);
    CHECK(compute_checksum(bytes_of("123456789")) == 0xCBF43926u);
    // Independent implementations agree on the check value too.
    CHECK(oracle::crc32_bitwise(bytes_of("123456789")) == 0xCBF43926u);
    CHECK(zlib_crc(bytes_of("123456789")) == 0xCBF43926u);
}

TEST_CASE("checksum matches zlib and a bitwise implementation on random buffers") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::uint8_t> buf(rng() % 600);
        for (auto& b : buf) {
            b = static_cast<std::uint8_t>(rng());
        }
        const auto ours = compute_checksum(buf);
        CHECK(ours == zlib_crc(buf));
        CHECK(ours == oracle::crc32_bitwise(buf));
        CHECK(ours == compute_checksum(buf));
    }
}

TEST_CASE("all-zero packet encodes to a 143-byte frame with the magic prefix") {
    AggregationPacket p;
    p.vector.assign(32, 0);
    const auto frame = encode_packet(p, 32);
    REQUIRE(frame.size() == 143);
    CHECK(frame_size(32) == 143);
    CHECK(frame[0] == 0x5A);
    CHECK(frame[1] == 0x4D);
    for (std::size_t i = 2; i < 139; ++i) {
        CHECK(frame[i] == 0);
    }
    const std::uint32_t crc = zlib_crc({frame.data(), 139});
    CHECK(frame[139] == (crc >> 24));
    CHECK(frame[140] == ((crc >> 16) & 0xFF));
    CHECK(frame[141] == ((crc >> 8) & 0xFF));
    CHECK(frame[142] == (crc & 0xFF));
}

TEST_CASE("header fields land at their documented big-endian positions") {
    AggregationPacket p{3, 1, 7, 224, std::vector<std::int32_t>(32, 1)};
    const auto f = encode_packet(p, 32);
    CHECK(f[2] == 0x01);  // flags: ver
    CHECK(f[3] == 0x00);
    CHECK(f[4] == 0x03);  // wid
    CHECK(f[5] == 0x00);
    CHECK(f[6] == 0x07);  // idx
    CHECK(f[7] == 0x00);
    CHECK(f[8] == 0x00);
    CHECK(f[9] == 0x00);
    CHECK(f[10] == 0xE0);  // off
    CHECK(f[11] == 0x00);
    CHECK(f[14] == 0x01);  // first element, big-endian 1

    AggregationPacket neg{0, 0, 0, 0, std::vector<std::int32_t>(32, 0)};
    neg.vector[0] = -2;
    const auto g = encode_packet(neg, 32);
    CHECK(g[11] == 0xFF);
    CHECK(g[12] == 0xFF);
    CHECK(g[13] == 0xFF);
    CHECK(g[14] == 0xFE);
}

TEST_CASE("decode inverts encode for random valid packets") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = (i % 10 == 0) ? 1 + rng() % 64 : 32;
        const auto p = random_packet(rng, k);
        const auto frame = encode_packet(p, k);
        CHECK(frame.size() == frame_size(k));
        const auto d = decode_packet(frame, k);
        REQUIRE(d.ok());
        CHECK(d.packet == p);
    }
}

TEST_CASE("every single-bit flip in a frame is rejected") {
    std::mt19937_64 rng(99);
    const auto p = random_packet(rng, 32);
    const auto frame = encode_packet(p, 32);
    std::size_t rejected = 0;
    for (std::size_t bit = 0; bit < frame.size() * 8; ++bit) {
        auto copy = frame;
        copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        const auto d = decode_packet(copy, 32);
        rejected += d.ok() ? 0 : 1;
        if (bit >= 16) {
            // outside the magic, the checksum is what catches it
            CHECK(d.status == DecodeStatus::kBadChecksum);
        }
    }
    CHECK(rejected == 143 * 8);
}

TEST_CASE("malformed buffers report their defect") {
    const std::vector<std::uint8_t> tiny(10, 0);
    CHECK(decode_packet(tiny, 32).status == DecodeStatus::kBadLength);

    AggregationPacket p{1, 0, 2, 64, std::vector<std::int32_t>(32, 5)};
    auto frame = encode_packet(p, 32);
    CHECK(decode_packet(frame, 16).status == DecodeStatus::kBadLength);

    auto bad_magic = frame;
    bad_magic[0] = 0x00;
    CHECK(decode_packet(bad_magic, 32).status == DecodeStatus::kBadMagic);

    // Reserved flag bits with a valid checksum.
    auto bad_flags = frame;
    bad_flags[2] = 0x02;
    const auto crc = compute_checksum({bad_flags.data(), 139});
    bad_flags[139] = static_cast<std::uint8_t>(crc >> 24);
    bad_flags[140] = static_cast<std::uint8_t>(crc >> 16);
    bad_flags[141] = static_cast<std::uint8_t>(crc >> 8);
    bad_flags[142] = static_cast<std::uint8_t>(crc);
    CHECK(decode_packet(bad_flags, 32).status == DecodeStatus::kBadFlags);
}

TEST_CASE("encode rejects vectors of the wrong length and bad versions") {
    AggregationPacket p{0, 0, 0, 0, std::vector<std::int32_t>(31, 0)};
    CHECK(thrown_code([&] { encode_packet(p, 32); }) == Errc::kInvalidPacket);
    p.vector.resize(32);
    p.ver = 2;
    CHECK(thrown_code([&] { encode_packet(p, 32); }) == Errc::kInvalidPacket);
}

TEST_CASE("control frames round-trip and are told apart from data frames") {
    ControlMessage m;
    m.type = ControlType::kTensor;
    m.wid = 5;
    m.workers = 8;
    m.pool_size = 128;
    m.chunk = 32;
    m.seq = 77;
    m.value = 0x0123456789ABCDEFULL;
    m.length = 1u << 20;
    const auto frame = encode_control(m);
    CHECK(frame.size() == kControlFrameBytes);
    CHECK(is_control_frame(frame));
    const auto d = decode_control(frame);
    REQUIRE(d.ok());
    CHECK(d.message == m);

    const auto data = encode_packet(AggregationPacket{0, 0, 0, 0, std::vector<std::int32_t>(32)}, 32);
    CHECK_FALSE(is_control_frame(data));
    CHECK_FALSE(decode_control(data).ok());

    for (std::size_t bit = 0; bit < frame.size() * 8; ++bit) {
        auto copy = frame;
        copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        CHECK_FALSE(decode_control(copy).ok());
    }
}
