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

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "switchagg/bench.hpp"
#include "switchagg/collective.hpp"
#include "switchagg/error.hpp"
#include "switchagg/quant.hpp"

namespace switchagg {
namespace {

struct Dataset {
    std::size_t features = 0;
    std::vector<double> x;  // row-major, column 0 is the constant bias input
    std::vector<double> y;
    double max_abs_x = 0.0;

    const double* row(std::size_t i) const { return x.data() + i * features; }
    std::size_t size() const { return y.size(); }
};

// Labels come from a random hyperplane through the uniform cube, so the two
// classes are linearly separable.
Dataset make_dataset(std::uint32_t samples, std::uint32_t features, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> plane(features);
    for (auto& p : plane) {
        p = unit(rng);
    }
    plane[0] *= 0.25;
    Dataset d;
    d.features = features;
    d.x.resize(static_cast<std::size_t>(samples) * features);
    d.y.resize(samples);
    for (std::uint32_t i = 0; i < samples; ++i) {
        double* r = d.x.data() + static_cast<std::size_t>(i) * features;
        r[0] = 1.0;
        double z = 0.0;
        for (std::uint32_t j = 0; j < features; ++j) {
            if (j > 0) {
                r[j] = unit(rng);
            }
            z += plane[j] * r[j];
            d.max_abs_x = std::max(d.max_abs_x, std::abs(r[j]));
        }
        d.y[i] = z > 0.0 ? 1.0 : 0.0;
    }
    return d;
}

double dot(const double* a, const std::vector<double>& w) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        z += a[j] * w[j];
    }
    return z;
}

double mean_log_loss(const Dataset& d, const std::vector<double>& w) {
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double z = dot(d.row(i), w);
        // log(1 + e^z) - y z, evaluated without overflow
        const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        total += softplus - d.y[i] * z;
    }
    return total / static_cast<double>(d.size());
}

// -lr times the mean gradient over rows [begin, end).
std::vector<double> local_update(const Dataset& d, const std::vector<double>& w, std::size_t begin,
                                 std::size_t end, double lr) {
    std::vector<double> g(w.size(), 0.0);
    for (std::size_t i = begin; i < end; ++i) {
        const double* r = d.row(i);
        const double err = 1.0 / (1.0 + std::exp(-dot(r, w))) - d.y[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            g[j] += err * r[j];
        }
    }
    const double scale = -lr / static_cast<double>(end - begin);
    for (auto& v : g) {
        v *= scale;
    }
    return g;
}

}  // namespace

bool loss_diverged(std::span<const double> loss, std::size_t streak) {
    std::size_t rising = 0;
    for (std::size_t e = 1; e < loss.size(); ++e) {
        rising = loss[e] > loss[e - 1] ? rising + 1 : 0;
        if (streak > 0 && rising >= streak) {
            return true;
        }
    }
    return false;
}

TrainResult mini_train(const TrainConfig& cfg) {
    if (cfg.workers == 0 || cfg.samples == 0 || cfg.samples % cfg.workers != 0) {
        throw Error(Errc::kInvalidConfig, "samples must split evenly across workers");
    }
    if (cfg.features < 2 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0)) {
        throw Error(Errc::kInvalidConfig, "need >= 2 features, >= 1 epoch, positive rate");
    }
    const Dataset data = make_dataset(cfg.samples, cfg.features, cfg.seed);
    const std::size_t per_worker = cfg.samples / cfg.workers;

    TrainResult out;
    std::vector<double> w(cfg.features, 0.0);
    // |sigmoid - y| < 1, so every update element is below lr * max|x|.
    const double bound = cfg.learning_rate * data.max_abs_x;
    out.scaling_factor = choose_scaling_factor(cfg.workers, bound) * cfg.scaling_multiplier;

    std::optional<SimulatedCollective> collective;
    if (cfg.quantize) {
        CollectiveConfig cc;
        cc.workers = cfg.workers;
        cc.pool_size = cfg.pool_size;
        cc.chunk = cfg.chunk;
        cc.scaling_factor = out.scaling_factor;
        cc.reduction = Reduction::kAverage;
        cc.channel.loss_prob = cfg.loss_prob;
        cc.seed = cfg.seed;
        collective.emplace(cc);
    }

    out.loss.push_back(mean_log_loss(data, w));
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<Tensor> updates(cfg.workers);
        for (std::uint32_t i = 0; i < cfg.workers; ++i) {
            updates[i].id = epoch;
            updates[i].values =
                local_update(data, w, i * per_worker, (i + 1) * per_worker, cfg.learning_rate);
        }
        std::vector<double> avg(cfg.features, 0.0);
        if (collective) {
            avg = collective->all_reduce(updates).front();
        } else {
            for (const auto& u : updates) {
                for (std::size_t j = 0; j < avg.size(); ++j) {
                    avg[j] += u.values[j];
                }
            }
            for (auto& v : avg) {
                v /= cfg.workers;
            }
        }
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] += avg[j];
        }
        out.loss.push_back(mean_log_loss(data, w));
    }
    out.diverged = loss_diverged(out.loss);
    out.stalled = true;
    for (std::size_t e = 1; e < out.loss.size(); ++e) {
        if (std::abs(out.loss[e] - out.loss[e - 1]) > 1e-12) {
            out.stalled = false;
        }
    }
    out.weights = std::move(w);
    return out;
}

}  // namespace switchagg
