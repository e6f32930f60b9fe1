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

#include "switchagg/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace switchagg::kernels {
namespace {

constexpr double kInt32Min = -2147483648.0;
constexpr double kInt32Max = 2147483647.0;

inline bool quantize_one(double x, double f, std::int32_t& out) noexcept {
    const double r = std::round(f * x);
    if (!(r >= kInt32Min && r <= kInt32Max)) {  // NaN fails both
        out = std::signbit(r) ? std::numeric_limits<std::int32_t>::min()
                              : std::numeric_limits<std::int32_t>::max();
        return false;
    }
    out = static_cast<std::int32_t>(r);
    return true;
}

inline bool half_round_trip(float x, float& out) noexcept {
    bool overflow = false;
    out = half_bits_to_float(float_to_half_bits(x, &overflow));
    return !overflow;
}

inline bool add_wrapping(std::int32_t& acc, std::int32_t v) noexcept {
    std::int32_t sum;
    const bool wrapped = __builtin_add_overflow(acc, v, &sum);
    acc = sum;
    return !wrapped;
}

inline std::ptrdiff_t ssize(std::size_t n) noexcept { return static_cast<std::ptrdiff_t>(n); }

}  // namespace

std::uint16_t float_to_half_bits(float x, bool* overflow) noexcept {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    const auto sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000U);
    const std::uint32_t exp = (bits >> 23) & 0xFFU;
    std::uint32_t mant = bits & 0x7FFFFFU;
    if (overflow) {
        *overflow = false;
    }

    if (exp == 0xFFU) {  // inf / NaN; keep NaN quiet
        return static_cast<std::uint16_t>(sign | 0x7C00U | (mant ? 0x200U | (mant >> 13) : 0U));
    }
    const int e = static_cast<int>(exp) - 127 + 15;
    if (e >= 31) {
        if (overflow) {
            *overflow = true;
        }
        return static_cast<std::uint16_t>(sign | 0x7C00U);
    }
    if (e <= 0) {
        const int shift = 14 - e;
        if (shift > 24) {
            return sign;
        }
        mant |= 0x800000U;
        std::uint32_t h = mant >> shift;
        const std::uint32_t rem = mant & ((1U << shift) - 1U);
        const std::uint32_t half = 1U << (shift - 1);
        if (rem > half || (rem == half && (h & 1U))) {
            ++h;
        }
        return static_cast<std::uint16_t>(sign | h);
    }
    std::uint32_t h = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1FFFU;
    if (rem > 0x1000U || (rem == 0x1000U && (h & 1U))) {
        ++h;  // may carry into the exponent, up to infinity
    }
    if (h >= 0x7C00U && overflow) {
        *overflow = true;
    }
    return static_cast<std::uint16_t>(sign | h);
}

float half_bits_to_float(std::uint16_t h) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000U) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1FU;
    std::uint32_t mant = h & 0x3FFU;
    std::uint32_t bits;
    if (exp == 0x1FU) {
        bits = sign | 0x7F800000U | (mant << 13);
    } else if (exp != 0) {
        bits = sign | ((exp + 112) << 23) | (mant << 13);
    } else if (mant == 0) {
        bits = sign;
    } else {
        // subnormal: normalize
        int e = -1;
        do {
            ++e;
            mant <<= 1;
        } while ((mant & 0x400U) == 0);
        bits = sign | (static_cast<std::uint32_t>(112 - e) << 23) | ((mant & 0x3FFU) << 13);
    }
    return std::bit_cast<float>(bits);
}

std::size_t quantize(std::span<const double> x, double f, std::span<std::int32_t> out) noexcept {
    const std::ptrdiff_t n = ssize(std::min(x.size(), out.size()));
    std::size_t bad = 0;
#pragma omp parallel for schedule(static) reduction(+ : bad) if (n >= ssize(kParallelThreshold))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        bad += quantize_one(x[i], f, out[i]) ? 0 : 1;
    }
    return bad;
}

void dequantize(std::span<const std::int32_t> q, double f, std::span<double> out) noexcept {
    const std::ptrdiff_t n = ssize(std::min(q.size(), out.size()));
#pragma omp parallel for schedule(static) if (n >= ssize(kParallelThreshold))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = static_cast<double>(q[i]) / f;
    }
}

std::size_t round_to_half(std::span<const float> x, std::span<float> out) noexcept {
    const std::ptrdiff_t n = ssize(std::min(x.size(), out.size()));
    std::size_t bad = 0;
#pragma omp parallel for schedule(static) reduction(+ : bad) if (n >= ssize(kParallelThreshold))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        bad += half_round_trip(x[i], out[i]) ? 0 : 1;
    }
    return bad;
}

double max_abs(std::span<const double> x) noexcept {
    const std::ptrdiff_t n = ssize(x.size());
    double m = 0.0;
#pragma omp parallel for schedule(static) reduction(max : m) if (n >= ssize(kParallelThreshold))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        m = std::max(m, std::fabs(x[i]));
    }
    return m;
}

std::size_t accumulate_wrapping(std::span<std::int32_t> acc,
                                std::span<const std::int32_t> add) noexcept {
    const std::ptrdiff_t n = ssize(std::min(acc.size(), add.size()));
    std::size_t wraps = 0;
#pragma omp parallel for schedule(static) reduction(+ : wraps) if (n >= ssize(kParallelThreshold))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        wraps += add_wrapping(acc[i], add[i]) ? 0 : 1;
    }
    return wraps;
}

namespace reference {

std::size_t quantize(std::span<const double> x, double f, std::span<std::int32_t> out) noexcept {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < x.size() && i < out.size(); ++i) {
        if (!quantize_one(x[i], f, out[i])) {
            ++bad;
        }
    }
    return bad;
}

void dequantize(std::span<const std::int32_t> q, double f, std::span<double> out) noexcept {
    for (std::size_t i = 0; i < q.size() && i < out.size(); ++i) {
        out[i] = static_cast<double>(q[i]) / f;
    }
}

std::size_t round_to_half(std::span<const float> x, std::span<float> out) noexcept {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < x.size() && i < out.size(); ++i) {
        if (!half_round_trip(x[i], out[i])) {
            ++bad;
        }
    }
    return bad;
}

double max_abs(std::span<const double> x) noexcept {
    double m = 0.0;
    for (double v : x) {
        m = std::max(m, std::fabs(v));
    }
    return m;
}

std::size_t accumulate_wrapping(std::span<std::int32_t> acc,
                                std::span<const std::int32_t> add) noexcept {
    std::size_t wraps = 0;
    for (std::size_t i = 0; i < acc.size() && i < add.size(); ++i) {
        if (!add_wrapping(acc[i], add[i])) {
            ++wraps;
        }
    }
    return wraps;
}

}  // namespace reference
}  // namespace switchagg::kernels
