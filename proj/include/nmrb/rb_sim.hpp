// Copyright 2026 The nmrb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NMRB_RB_SIM_HPP
#define NMRB_RB_SIM_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "nmrb/clifford.hpp"
#include "nmrb/curve.hpp"
#include "nmrb/noise_models.hpp"
#include "nmrb/random.hpp"
#include "nmrb/sequence.hpp"

namespace nmrb {

enum class GateSource { Clifford24, Haar };

struct RBRunConfig {
    std::vector<std::size_t> m_values;
    std::size_t samples_per_m = 50;
    GateSource gate_source = GateSource::Clifford24;
    IdentityPattern pattern;
    std::uint64_t seed = 0;
    /// 0 selects the hardware concurrency.
    std::size_t threads = 1;

    void validate() const {
        if (samples_per_m < 1) {
            throw std::invalid_argument("RBRunConfig: samples_per_m must be >= 1");
        }
        if (pattern.interleave > 0 && !pattern.fixed_ids.empty()) {
            throw std::invalid_argument("RBRunConfig: fixed ids and interleaving are mutually exclusive");
        }
        if (!std::is_sorted(m_values.begin(), m_values.end()) ||
            std::adjacent_find(m_values.begin(), m_values.end()) != m_values.end()) {
            throw std::invalid_argument("RBRunConfig: m values must be strictly increasing");
        }
        if (!m_values.empty() && m_values.front() < 1) {
            throw std::invalid_argument("RBRunConfig: m values must be >= 1");
        }
    }
};

/// Which of the steps of a length-m run carry a random gate.
inline std::vector<bool> random_positions(const IdentityPattern &pattern, std::size_t m) {
    if (pattern.interleave > 0) {
        const std::size_t k = pattern.interleave;
        std::vector<bool> out(m * (k + 1), false);
        for (std::size_t j = 0; j < m; ++j) {
            out[j * (k + 1)] = true;
        }
        return out;
    }
    std::vector<bool> out(m, true);
    for (auto id : pattern.fixed_ids) {
        if (id >= 1 && id <= m) {
            out[id - 1] = false;
        }
    }
    if (std::none_of(out.begin(), out.end(), [](bool b) { return b; })) {
        throw std::invalid_argument("identity pattern fixes every step at m=" + std::to_string(m));
    }
    return out;
}

namespace detail {

/// Sum by recursive halving; the result depends only on the input order.
inline double pairwise_sum(const double *v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += v[i];
        }
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested == 0) {
        const unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : hc;
    }
    return requested;
}

/// Runs task(i) for i in [0, n) on a worker pool; rethrows the first error.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F &&task) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next.store(n);
                }
            }
        });
    }
    for (auto &th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace detail

struct SampleStats {
    double mean = 0.0;
    std::optional<double> std_error;
};

/// Mean and standard error of the mean (sample std / sqrt(n)); the error is
/// absent for a single sample.
inline SampleStats summarize(const std::vector<double> &v) {
    const std::size_t n = v.size();
    SampleStats s;
    s.mean = detail::pairwise_sum(v.data(), n) / static_cast<double>(n);
    if (n > 1) {
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) {
            sq[i] = (v[i] - s.mean) * (v[i] - s.mean);
        }
        const double var = detail::pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
        s.std_error = std::sqrt(var / static_cast<double>(n));
    }
    return s;
}

/// Gate sequence for one sample; identity at non-random steps. The stream is
/// a function of (seed, m, sample) alone.
inline std::vector<ComplexMatrix> draw_gates(const std::vector<bool> &random, GateSource source, std::uint64_t seed,
                                             std::size_t m, std::size_t sample) {
    SeededRng rng(derive_seed(seed, m, sample));
    const GateSet &cl = GateSet::clifford24();
    std::vector<ComplexMatrix> gates;
    gates.reserve(random.size());
    for (bool r : random) {
        if (!r) {
            gates.push_back(identity(2));
        } else if (source == GateSource::Clifford24) {
            gates.push_back(cl[rng.uniform_index(cl.size())]);
        } else {
            gates.push_back(haar_random_unitary(2, rng));
        }
    }
    return gates;
}

/// Monte-Carlo estimate of the average sequence fidelity on cfg.m_values.
/// m counts random gates for interleaved patterns and all steps otherwise.
inline ASFCurve run_rb(const NoiseProcess &process, const RBRunConfig &cfg) {
    cfg.validate();
    if (process.dims.sys != 2) {
        throw DimensionError("run_rb: gate sources are defined for a qubit system");
    }
    CurveMeta meta;
    meta.model_id = process.model_id;
    meta.seed = cfg.seed;
    meta.samples = cfg.samples_per_m;
    meta.pattern = cfg.pattern;
    meta.engine = Engine::MonteCarlo;
    ASFCurve curve(meta);
    if (cfg.m_values.empty()) {
        return curve;
    }
    std::vector<std::vector<bool>> positions;
    std::size_t max_steps = 0;
    for (auto m : cfg.m_values) {
        positions.push_back(random_positions(cfg.pattern, m));
        max_steps = std::max(max_steps, positions.back().size());
    }
    const SequenceKernel kernel(process, joint_steps(process, max_steps + 1));

    const std::size_t ns = cfg.samples_per_m;
    const std::size_t nm = cfg.m_values.size();
    std::vector<double> results(nm * ns, 0.0);
    detail::parallel_for(nm * ns, detail::resolve_threads(cfg.threads), [&](std::size_t task) {
        const std::size_t im = task / ns;
        const std::size_t s = task % ns;
        const auto gates = draw_gates(positions[im], cfg.gate_source, cfg.seed, cfg.m_values[im], s);
        results[task] = kernel.fidelity(gates);
    });
    for (std::size_t im = 0; im < nm; ++im) {
        const std::vector<double> v(results.begin() + static_cast<long>(im * ns),
                                    results.begin() + static_cast<long>((im + 1) * ns));
        const auto st = summarize(v);
        curve.push_back(cfg.m_values[im], st.mean, st.std_error);
    }
    return curve;
}

/// One Monte-Carlo curve per identity pattern, recorded in each curve's meta.
inline std::vector<ASFCurve> run_interleaved_identity_scan(const NoiseProcess &process, const RBRunConfig &cfg,
                                                           const std::vector<IdentityPattern> &patterns) {
    std::vector<ASFCurve> out;
    for (const auto &p : patterns) {
        RBRunConfig c = cfg;
        c.pattern = p;
        out.push_back(run_rb(process, c));
    }
    return out;
}

}  // namespace nmrb

#endif  // NMRB_RB_SIM_HPP
