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

#ifndef SWITCHAGG_METRICS_HPP_
#define SWITCHAGG_METRICS_HPP_

#include <cstdint>
#include <vector>

namespace switchagg {

/// Counters and timings for one aggregated tensor.
struct RunMetrics {
    /// Tensor aggregation time of the slowest worker: from the moment the
    /// workers are ready to send until the worker holds the whole aggregate.
    std::int64_t tat_ns = 0;
    std::vector<std::int64_t> worker_tat_ns;
    std::uint64_t elements = 0;
    /// Aggregated tensor elements per second, elements / tat.
    double ate_per_sec = 0.0;

    std::uint64_t sends = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t drops = 0;
    std::uint64_t dups = 0;
    std::uint64_t corruptions = 0;
    std::uint64_t ignored = 0;
    std::uint64_t multicasts = 0;
    std::uint64_t unicasts = 0;
    std::uint64_t stale_results = 0;

    std::int64_t bin_ns = 10'000'000;
    /// send_bins[w][b]: packets worker w sent during [b*bin_ns, (b+1)*bin_ns)
    /// of this tensor.
    std::vector<std::vector<std::uint64_t>> send_bins;

    void finish() {
        ate_per_sec = tat_ns > 0 ? static_cast<double>(elements) * 1e9 / static_cast<double>(tat_ns)
                                 : 0.0;
    }
};

}  // namespace switchagg

#endif  // SWITCHAGG_METRICS_HPP_
