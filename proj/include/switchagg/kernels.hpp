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
 * @file kernels.hpp
 * @brief Elementwise host kernels: scaling, rounding, type conversion.
 *
 * The functions in switchagg::kernels are OpenMP-parallel over elements once
 * the input is large enough. switchagg::kernels::reference holds plain serial
 * loops with identical results; tests compare the two bit for bit and
 * bench_kernels times them.
 */

#ifndef SWITCHAGG_KERNELS_HPP_
#define SWITCHAGG_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>

namespace switchagg::kernels {

/// Below this many elements the parallel kernels run on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 14;

/// Binary32 to binary16 bits, round to nearest even. Sets *overflow when a
/// finite input becomes infinite.
std::uint16_t float_to_half_bits(float x, bool* overflow = nullptr) noexcept;
float half_bits_to_float(std::uint16_t h) noexcept;

/// out[i] = round(f * x[i]), ties away from zero. Entries outside the int32
/// range (or NaN) are saturated and counted; returns the count.
std::size_t quantize(std::span<const double> x, double f, std::span<std::int32_t> out) noexcept;

/// out[i] = q[i] / f.
void dequantize(std::span<const std::int32_t> q, double f, std::span<double> out) noexcept;

/// Round-trips through binary16; returns how many finite inputs overflowed.
std::size_t round_to_half(std::span<const float> x, std::span<float> out) noexcept;

double max_abs(std::span<const double> x) noexcept;

/// acc[i] += add[i] with two's-complement wrap; returns the number of wraps.
std::size_t accumulate_wrapping(std::span<std::int32_t> acc,
                                std::span<const std::int32_t> add) noexcept;

namespace reference {

std::size_t quantize(std::span<const double> x, double f, std::span<std::int32_t> out) noexcept;
void dequantize(std::span<const std::int32_t> q, double f, std::span<double> out) noexcept;
std::size_t round_to_half(std::span<const float> x, std::span<float> out) noexcept;
double max_abs(std::span<const double> x) noexcept;
std::size_t accumulate_wrapping(std::span<std::int32_t> acc,
                                std::span<const std::int32_t> add) noexcept;

}  // namespace reference
}  // namespace switchagg::kernels

#endif  // SWITCHAGG_KERNELS_HPP_
