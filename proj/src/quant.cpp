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

#include "switchagg/quant.hpp"

#include <cmath>
#include <string>

#include "switchagg/error.hpp"
#include "switchagg/kernels.hpp"

namespace switchagg {
namespace {
constexpr double kTwo31 = 2147483648.0;
}

void QuantConfig::validate() const {
    if (!(scaling_factor > 0.0) || !std::isfinite(scaling_factor)) {
        throw Error(Errc::kInvalidConfig, "scaling factor must be positive and finite");
    }
    if (workers == 0) {
        throw Error(Errc::kInvalidConfig, "worker count must be positive");
    }
    if (bound > 0.0 && scaling_factor > choose_scaling_factor(workers, bound)) {
        throw Error(Errc::kInvalidConfig, "scaling factor exceeds the no-overflow limit");
    }
}

BoundProfile profile_bound(std::span<const std::vector<double>> samples, double margin) {
    if (samples.empty()) {
        throw Error(Errc::kEmptyInput, "no samples to profile");
    }
    double m = 0.0;
    for (const auto& s : samples) {
        m = std::max(m, kernels::max_abs(s));
    }
    BoundProfile p;
    p.bound = m * margin;
    p.degenerate = !(p.bound > 0.0);
    return p;
}

double choose_scaling_factor(std::uint32_t workers, double bound) {
    if (workers == 0) {
        throw Error(Errc::kInvalidConfig, "worker count must be positive");
    }
    if (!(bound > 0.0)) {
        throw Error(Errc::kDegenerateBound, "bound must be positive");
    }
    return (kTwo31 - workers) / (static_cast<double>(workers) * bound);
}

std::vector<std::int32_t> quantize(std::span<const double> x, double f) {
    if (!(f > 0.0)) {
        throw Error(Errc::kInvalidConfig, "scaling factor must be positive");
    }
    std::vector<std::int32_t> out(x.size());
    if (const auto bad = kernels::quantize(x, f, out); bad != 0) {
        throw Error(Errc::kOverflow,
                    std::to_string(bad) + " entries do not fit int32 after scaling");
    }
    return out;
}

std::vector<double> dequantize(std::span<const std::int32_t> q, double f) {
    if (!(f > 0.0)) {
        throw Error(Errc::kInvalidConfig, "scaling factor must be positive");
    }
    std::vector<double> out(q.size());
    kernels::dequantize(q, f, out);
    return out;
}

double aggregation_error_bound(std::uint32_t workers, double f) {
    if (!(f > 0.0)) {
        throw Error(Errc::kInvalidConfig, "scaling factor must be positive");
    }
    return static_cast<double>(workers) / f;
}

HalfRoundTrip quantize_half(std::span<const float> x) {
    HalfRoundTrip r;
    r.values.resize(x.size());
    r.overflowed = kernels::round_to_half(x, r.values);
    return r;
}

}  // namespace switchagg
