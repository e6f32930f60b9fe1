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
 * @file quant.hpp
 * @brief Fixed-point conversion of updates for integer aggregation.
 *
 * Workers multiply updates by a scaling factor f and round to int32; the
 * switch sums the integers; workers divide the aggregate by f. With every
 * entry bounded by B, choosing f <= (2^31 - n) / (n * B) guarantees neither
 * the per-worker integers nor their sum overflow, and the dequantized sum is
 * within n / f of the exact sum.
 */

#ifndef SWITCHAGG_QUANT_HPP_
#define SWITCHAGG_QUANT_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace switchagg {

struct QuantConfig {
    double scaling_factor = 1.0;
    std::uint32_t workers = 1;
    /// Magnitude bound; 0 when unknown.
    double bound = 0.0;

    /// Throws Error(kInvalidConfig) if f <= 0, or f exceeds the no-overflow
    /// limit for a known bound.
    void validate() const;
};

struct BoundProfile {
    double bound = 0.0;
    /// Set when every sample is zero, so no scaling factor can be derived.
    bool degenerate = false;
};

/// Max |x| over all samples times `margin`. Throws Error(kEmptyInput).
BoundProfile profile_bound(std::span<const std::vector<double>> samples, double margin = 1.0);

/// (2^31 - n) / (n * B). Throws Error(kDegenerateBound) if B <= 0,
/// Error(kInvalidConfig) if n == 0.
double choose_scaling_factor(std::uint32_t workers, double bound);

/// Round-to-nearest (ties away from zero) of f * x.
/// Throws Error(kOverflow) if any entry leaves the int32 range.
std::vector<std::int32_t> quantize(std::span<const double> x, double f);

std::vector<double> dequantize(std::span<const std::int32_t> q, double f);

/// n / f.
double aggregation_error_bound(std::uint32_t workers, double f);

struct HalfRoundTrip {
    std::vector<float> values;
    /// Finite inputs that became infinite.
    std::size_t overflowed = 0;
};

/// Emulates a binary16 payload: every entry is rounded to the nearest
/// binary16 value (ties to even) and widened back to binary32.
HalfRoundTrip quantize_half(std::span<const float> x);

}  // namespace switchagg

#endif  // SWITCHAGG_QUANT_HPP_
