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

#ifndef NMRB_ASF_HPP
#define NMRB_ASF_HPP

#include <algorithm>
#include <functional>
#include <set>
#include <vector>

#include "nmrb/channel.hpp"
#include "nmrb/clifford.hpp"
#include "nmrb/curve.hpp"
#include "nmrb/linalg.hpp"
#include "nmrb/noise_models.hpp"
#include "nmrb/sequence.hpp"

namespace nmrb {

/// Running operators of the average-sequence evaluator: x carries the
/// S-dependent part on E (x) S (starts at rho - rho_E (x) I/d_S), eps the E
/// operator that multiplies I/d_S (starts at rho_E).
struct AsfState {
    ComplexMatrix x;
    ComplexMatrix eps;
    Dims dims;

    static AsfState initial(const ComplexMatrix &rho, Dims dims) {
        const ComplexMatrix rho_e = partial_trace(rho, dims, Subsystem::Environment);
        const ComplexMatrix mixed_s = identity(dims.sys) / static_cast<double>(dims.sys);
        return {rho - kron(rho_e, mixed_s), rho_e, dims};
    }

    /// One averaged gate step under joint noise ch.
    void advance(const KrausChannel &ch) {
        const double ds = static_cast<double>(dims.sys);
        x = extend_env_superop({EnvSuperOp::Kind::DollarMinusTheta, ch, dims}, x) / (ds * ds - 1.0);
        eps = theta_map(ch, dims, eps);
        if (ch.tp_flag() == TpFlag::Preserving) {
            const double t = eps.trace().real();
            if (!(t >= -kTolerances.fidelity_bound && t <= 1.0 + kTolerances.fidelity_bound)) {
                throw NumericError("asf: environment weight left [0, 1] under trace-preserving noise");
            }
        }
    }

    /// tr[(I_E (x) M) undo(x + eps (x) I/d_S)].
    double readout(const KrausChannel &undo, const ComplexMatrix &povm) const {
        const ComplexMatrix mixed_s = identity(dims.sys) / static_cast<double>(dims.sys);
        const ComplexMatrix out = apply_channel(undo, x + kron(eps, mixed_s));
        return (kron(identity(dims.env), povm) * out).trace().real();
    }
};

/// Randomized protocol reduced to effective steps: one channel per random
/// gate (absorbing the noise of any identity steps after it), a state that
/// has already absorbed leading identity steps, and the undo-step noise.
struct EffectiveProtocol {
    ComplexMatrix rho;
    std::vector<KrausChannel> steps;
    KrausChannel undo;
};

inline double evaluate_protocol(const EffectiveProtocol &proto, const NoiseProcess &process) {
    AsfState st = AsfState::initial(proto.rho, process.dims);
    for (const auto &ch : proto.steps) {
        st.advance(ch);
    }
    return st.readout(proto.undo, process.povm);
}

/// Gates at fixed_ids are the identity. Noise of fixed steps before the first
/// random gate acts on rho directly; later fixed steps compose into the
/// preceding random step.
inline EffectiveProtocol reduce_protocol(const NoiseProcess &process, std::size_t total_steps,
                                         const std::set<std::size_t> &fixed_ids) {
    for (auto id : fixed_ids) {
        if (id < 1 || id > total_steps) {
            throw std::invalid_argument("identity pattern step " + std::to_string(id) + " outside 1.." +
                                        std::to_string(total_steps));
        }
    }
    if (total_steps > 0 && fixed_ids.size() == total_steps) {
        throw std::invalid_argument("identity pattern fixes every step; nothing is randomized");
    }
    ComplexMatrix rho = process.rho0.matrix();
    std::vector<KrausChannel> steps;
    for (std::size_t n = 1; n <= total_steps; ++n) {
        KrausChannel ch = process.joint_step(n);
        if (!fixed_ids.contains(n)) {
            steps.push_back(std::move(ch));
        } else if (steps.empty()) {
            rho = apply_channel(ch, rho);
        } else {
            steps.back() = compose(ch, steps.back());
        }
    }
    return {std::move(rho), std::move(steps), process.joint_step(total_steps + 1)};
}

/// Exact average sequence fidelity at length m.
inline double asf_analytical(const NoiseProcess &process, std::size_t m) {
    return evaluate_protocol(reduce_protocol(process, m, {}), process);
}

/// As asf_analytical with the gates at fixed_ids pinned to the identity;
/// m counts all steps, fixed or not.
inline double asf_with_identities(const NoiseProcess &process, std::size_t m, const std::set<std::size_t> &fixed_ids) {
    return evaluate_protocol(reduce_protocol(process, m, fixed_ids), process);
}

/// m random gates, each followed by k identity steps (m (k + 1) noisy steps
/// before the undo step).
inline double asf_interleaved(const NoiseProcess &process, std::size_t m, std::size_t k) {
    std::set<std::size_t> fixed;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 1; i <= k; ++i) {
            fixed.insert(j * (k + 1) + 1 + i);
        }
    }
    return asf_with_identities(process, m * (k + 1), fixed);
}

namespace detail {

/// Single pass over a grid when the effective step j does not depend on m.
inline ASFCurve single_pass(const NoiseProcess &process, const ComplexMatrix &rho,
                            const std::vector<std::size_t> &ms, const std::function<KrausChannel(std::size_t)> &step,
                            const std::function<KrausChannel(std::size_t)> &undo_for,
                            const std::function<std::size_t(std::size_t)> &random_steps_for, CurveMeta meta) {
    ASFCurve curve(std::move(meta));
    AsfState st = AsfState::initial(rho, process.dims);
    std::size_t done = 0;
    for (std::size_t m : ms) {
        const std::size_t target = random_steps_for(m);
        while (done < target) {
            ++done;
            st.advance(step(done));
        }
        curve.push_back(m, st.readout(undo_for(m), process.povm));
    }
    return curve;
}

}  // namespace detail

/// Analytical curve over an increasing grid for an identity pattern.
/// Empty and prefix patterns, and interleaving, run in one pass over the grid;
/// other fixed sets are evaluated per m, skipping fixed ids beyond m.
inline ASFCurve asf_curve(const NoiseProcess &process, const std::vector<std::size_t> &ms,
                          const IdentityPattern &pattern = {}) {
    CurveMeta meta;
    meta.model_id = process.model_id;
    meta.pattern = pattern;
    meta.engine = Engine::Analytical;
    if (!std::is_sorted(ms.begin(), ms.end()) || std::adjacent_find(ms.begin(), ms.end()) != ms.end()) {
        throw std::invalid_argument("asf_curve: m grid must be strictly increasing");
    }
    if (pattern.interleave > 0 && !pattern.fixed_ids.empty()) {
        throw std::invalid_argument("asf_curve: fixed ids and interleaving are mutually exclusive");
    }
    if (pattern.interleave > 0) {
        const std::size_t k = pattern.interleave;
        auto step = [&](std::size_t j) {
            KrausChannel ch = process.joint_step((j - 1) * (k + 1) + 1);
            for (std::size_t i = 1; i <= k; ++i) {
                ch = compose(process.joint_step((j - 1) * (k + 1) + 1 + i), ch);
            }
            return ch;
        };
        auto undo = [&](std::size_t m) { return process.joint_step(m * (k + 1) + 1); };
        return detail::single_pass(process, process.rho0.matrix(), ms, step, undo,
                                   [](std::size_t m) { return m; }, meta);
    }
    std::size_t prefix = 0;
    while (pattern.fixed_ids.contains(prefix + 1)) {
        ++prefix;
    }
    if (prefix == pattern.fixed_ids.size()) {
        ComplexMatrix rho = process.rho0.matrix();
        for (std::size_t n = 1; n <= prefix; ++n) {
            rho = apply_channel(process.joint_step(n), rho);
        }
        for (std::size_t m : ms) {
            if (m <= prefix) {
                throw std::invalid_argument("asf_curve: m=" + std::to_string(m) +
                                            " leaves no random gate after the fixed prefix");
            }
        }
        auto step = [&](std::size_t j) { return process.joint_step(j + prefix); };
        auto undo = [&](std::size_t m) { return process.joint_step(m + 1); };
        return detail::single_pass(process, rho, ms, step, undo, [prefix](std::size_t m) { return m - prefix; },
                                   meta);
    }
    ASFCurve curve(meta);
    for (std::size_t m : ms) {
        std::set<std::size_t> ids;
        for (auto id : pattern.fixed_ids) {
            if (id <= m) {
                ids.insert(id);
            }
        }
        curve.push_back(m, asf_with_identities(process, m, ids));
    }
    return curve;
}

/// F_m = (prod_{n <= m} p_n) A + B for m = 1..len(p_list).
inline ASFCurve asf_markovian(const std::vector<double> &p_list, double a, double b) {
    CurveMeta meta;
    meta.model_id = "markovian";
    meta.engine = Engine::Markovianized;
    ASFCurve curve(meta);
    double prod = 1.0;
    for (std::size_t n = 0; n < p_list.size(); ++n) {
        prod *= p_list[n];
        curve.push_back(n + 1, prod * a + b);
    }
    return curve;
}

struct MarkovianConstants {
    double a = 0.0;
    double b = 0.0;
};

/// A = tr[M L(rho_S - I/d)], B = tr[M L(I/d)] for final-step channel L on S.
inline MarkovianConstants markovian_constants(const KrausChannel &final_step, const ComplexMatrix &rho_s,
                                              const ComplexMatrix &povm) {
    const ComplexMatrix mixed = identity(final_step.dim()) / static_cast<double>(final_step.dim());
    return {(povm * apply_channel(final_step, rho_s - mixed)).trace().real(),
            (povm * apply_channel(final_step, mixed)).trace().real()};
}

/// Same process with every step replaced by its eps-Markovianization on S.
inline NoiseProcess markovianized_process(const NoiseProcess &process, const DensityOperator &eps) {
    const Dims dims = process.dims;
    const NoiseProcess src = process;
    StepGenerator gen = [src, dims, eps](std::size_t n) -> StepNoise {
        return SystemOnlyStep{markovianize(src.joint_step(n), dims, eps)};
    };
    return NoiseProcess(dims, process.rho0, std::move(gen), process.povm, process.model_id + ":markovianized");
}

inline NoiseProcess markovianized_process(const NoiseProcess &process) {
    return markovianized_process(process, DensityOperator::on_system(basis_projector(process.dims.env, 0)));
}

/// Markovianized reference curve: p_n from each Markovianized step and
/// A, B from the undo step, evaluated in closed form.
inline ASFCurve markovianized_asf(const NoiseProcess &process, const std::vector<std::size_t> &ms,
                                  const DensityOperator &eps) {
    CurveMeta meta;
    meta.model_id = process.model_id + ":markovianized";
    meta.engine = Engine::Markovianized;
    ASFCurve curve(meta);
    const ComplexMatrix rho_s = process.rho0.reduced_sys();
    double prod = 1.0;
    std::size_t done = 0;
    for (std::size_t m : ms) {
        while (done < m) {
            ++done;
            prod *= noise_strength(markovianize(process.joint_step(done), process.dims, eps)).p;
        }
        const auto c = markovian_constants(markovianize(process.joint_step(m + 1), process.dims, eps), rho_s,
                                           process.povm);
        curve.push_back(m, prod * c.a + c.b);
    }
    return curve;
}

inline ASFCurve markovianized_asf(const NoiseProcess &process, const std::vector<std::size_t> &ms) {
    return markovianized_asf(process, ms, DensityOperator::on_system(basis_projector(process.dims.env, 0)));
}

namespace detail {

template <class T>
T expect_step(const StepNoise &s, std::size_t n, const char *what) {
    if (!std::holds_alternative<T>(s)) {
        throw std::invalid_argument(std::string(what) + ": step " + std::to_string(n) +
                                    " does not have the structure this closed form requires");
    }
    return std::get<T>(s);
}

inline void require_tp_system(const KrausChannel &ch, std::size_t n, const char *what) {
    if (ch.tp_flag() != TpFlag::Preserving) {
        throw std::invalid_argument(std::string(what) + ": system-only step " + std::to_string(n) +
                                    " must be trace preserving");
    }
}

}  // namespace detail

/// Joint noise on steps 1..ell, trace-preserving system-only noise after:
/// F = p_{ell+1}...p_m tr[M L_{m+1}(tr_E X_ell)] + tr[eps_ell] tr[M L_{m+1}(I/d)].
inline double asf_corollary_initial(const NoiseProcess &process, std::size_t ell, std::size_t m) {
    constexpr const char *what = "asf_corollary_initial";
    if (ell >= m) {
        throw std::invalid_argument("asf_corollary_initial: require ell < m");
    }
    const Dims dims = process.dims;
    AsfState st = AsfState::initial(process.rho0.matrix(), dims);
    for (std::size_t n = 1; n <= ell; ++n) {
        st.advance(detail::expect_step<JointStep>(process.step(n), n, what).channel);
    }
    double prod = 1.0;
    for (std::size_t n = ell + 1; n <= m; ++n) {
        const auto ch = detail::expect_step<SystemOnlyStep>(process.step(n), n, what).channel;
        detail::require_tp_system(ch, n, what);
        prod *= noise_strength(ch).p;
    }
    const auto last = detail::expect_step<SystemOnlyStep>(process.step(m + 1), m + 1, what).channel;
    const ComplexMatrix x_s = partial_trace(st.x, dims, Subsystem::System);
    const ComplexMatrix mixed = identity(dims.sys) / static_cast<double>(dims.sys);
    const double a_term = (process.povm * apply_channel(last, x_s)).trace().real();
    const double b = (process.povm * apply_channel(last, mixed)).trace().real();
    return prod * a_term + st.eps.trace().real() * b;
}

namespace detail {

/// tr[M tr_E L(x)] and tr[M tr_E L(eps (x) I/d)] with x, eps pushed through
/// the given joint steps separately.
struct SplitTerms {
    double a_term = 0.0;
    double b_term = 0.0;
};

inline SplitTerms split_readout(const NoiseProcess &process, ComplexMatrix x, ComplexMatrix eps,
                                std::size_t first, std::size_t m, const char *what) {
    const Dims dims = process.dims;
    const double ds = static_cast<double>(dims.sys);
    for (std::size_t n = first; n <= m; ++n) {
        const auto ch = expect_step<JointStep>(process.step(n), n, what).channel;
        x = extend_env_superop({EnvSuperOp::Kind::DollarMinusTheta, ch, dims}, x) / (ds * ds - 1.0);
        eps = theta_map(ch, dims, eps);
    }
    const auto last = expect_step<JointStep>(process.step(m + 1), m + 1, what).channel;
    const ComplexMatrix mm = kron(identity(dims.env), process.povm);
    const ComplexMatrix mixed = identity(dims.sys) / ds;
    return {(mm * apply_channel(last, x)).trace().real(),
            (mm * apply_channel(last, kron(eps, mixed))).trace().real()};
}

}  // namespace detail

/// Trace-preserving system-only noise on steps 1..ell, joint noise after:
/// F = p_1...p_ell tr[M tr_E L_{m+1} A_{m:ell+1}(rho)] + tr[M tr_E L_{m+1} B_{m:ell+1}(rho)].
inline double asf_corollary_late(const NoiseProcess &process, std::size_t ell, std::size_t m) {
    constexpr const char *what = "asf_corollary_late";
    if (ell >= m) {
        throw std::invalid_argument("asf_corollary_late: require ell < m");
    }
    double prod = 1.0;
    for (std::size_t n = 1; n <= ell; ++n) {
        const auto ch = detail::expect_step<SystemOnlyStep>(process.step(n), n, what).channel;
        detail::require_tp_system(ch, n, what);
        prod *= noise_strength(ch).p;
    }
    const AsfState st0 = AsfState::initial(process.rho0.matrix(), process.dims);
    const auto t = detail::split_readout(process, st0.x, st0.eps, ell + 1, m, what);
    return prod * t.a_term + t.b_term;
}

/// Joint noise throughout, with step ell followed by resetting E to eps:
/// F = tr[M tr_E L_{m+1} A_{m:ell+1}(eps (x) tr_E A_ell(rho))]
///     + tr[B_ell(rho)] tr[M tr_E L_{m+1} B_{m:ell+1}(eps (x) I/d)].
inline double asf_corollary_blocks(const NoiseProcess &process, std::size_t ell, const DensityOperator &eps,
                                   std::size_t m) {
    constexpr const char *what = "asf_corollary_blocks";
    if (ell >= m || ell < 1) {
        throw std::invalid_argument("asf_corollary_blocks: require 1 <= ell < m");
    }
    const Dims dims = process.dims;
    AsfState st = AsfState::initial(process.rho0.matrix(), dims);
    for (std::size_t n = 1; n < ell; ++n) {
        st.advance(detail::expect_step<JointStep>(process.step(n), n, what).channel);
    }
    const auto reset = detail::expect_step<ResetAfterStep>(process.step(ell), ell, what);
    if (!approx_equal(reset.eps.matrix(), eps.matrix(), 1e-12)) {
        throw std::invalid_argument("asf_corollary_blocks: reset state at step ell differs from eps");
    }
    st.advance(reset.channel);  // A_ell and B_ell with the un-reset channel.
    const ComplexMatrix a_s = partial_trace(st.x, dims, Subsystem::System);
    const double b_weight = st.eps.trace().real();

    // A_{m:ell+1} acts on (y - y_E (x) I/d) with y = eps (x) tr_E A_ell(rho).
    const ComplexMatrix y = kron(eps.matrix(), a_s);
    const ComplexMatrix y_e = partial_trace(y, dims, Subsystem::Environment);
    const ComplexMatrix mixed = identity(dims.sys) / static_cast<double>(dims.sys);
    const auto a = detail::split_readout(process, y - kron(y_e, mixed), zeros(dims.env, dims.env), ell + 1, m, what);
    const auto b = detail::split_readout(process, zeros(dims.total(), dims.total()), eps.matrix(), ell + 1, m, what);
    return a.a_term + b_weight * b.b_term;
}

/// Exact average over all 24^m Clifford tuples (m <= 2) by enumeration.
inline double asf_oracle_clifford_enum(const NoiseProcess &process, std::size_t m) {
    if (process.dims.sys != 2) {
        throw DimensionError("asf_oracle_clifford_enum: requires a qubit system");
    }
    if (m < 1 || m > 2) {
        throw std::invalid_argument("asf_oracle_clifford_enum: m must be 1 or 2 (cost guard)");
    }
    const GateSet &cl = GateSet::clifford24();
    const SequenceKernel kernel(process, joint_steps(process, m + 1));
    double acc = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> idx(m, 0);
    while (true) {
        std::vector<ComplexMatrix> gates;
        for (auto i : idx) {
            gates.push_back(cl[i]);
        }
        acc += kernel.fidelity(gates);
        ++count;
        std::size_t pos = 0;
        while (pos < m && ++idx[pos] == cl.size()) {
            idx[pos] = 0;
            ++pos;
        }
        if (pos == m) {
            break;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace nmrb

#endif  // NMRB_ASF_HPP
