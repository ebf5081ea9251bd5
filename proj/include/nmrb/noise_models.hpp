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

#ifndef NMRB_NOISE_MODELS_HPP
#define NMRB_NOISE_MODELS_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nmrb/channel.hpp"
#include "nmrb/linalg.hpp"

namespace nmrb {

/// Noise channel on E (x) S for one step.
struct JointStep {
    KrausChannel channel;
};

/// Noise acting on S alone; E is a spectator.
struct SystemOnlyStep {
    KrausChannel channel;
};

/// Joint noise followed by resetting E to eps: X -> eps (x) tr_E[ch(X)].
struct ResetAfterStep {
    KrausChannel channel;
    DensityOperator eps;
};

using StepNoise = std::variant<JointStep, SystemOnlyStep, ResetAfterStep>;

/// Step noise as one channel on E (x) S.
inline KrausChannel to_joint_channel(const StepNoise &step, Dims dims) {
    return std::visit(
        [&](const auto &s) -> KrausChannel {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, JointStep>) {
                require_channel_dim(s.channel, dims.total(), "JointStep");
                return s.channel;
            } else if constexpr (std::is_same_v<T, SystemOnlyStep>) {
                require_channel_dim(s.channel, dims.sys, "SystemOnlyStep");
                return embed_system(s.channel, dims.env);
            } else {
                return reset_after(s.channel, s.eps, dims);
            }
        },
        step);
}

/// Step index n (1-based; n = m + 1 is the undo step) to its noise.
using StepGenerator = std::function<StepNoise(std::size_t)>;

/// Initial state, per-step noise and measurement of an RB experiment.
struct NoiseProcess {
    Dims dims;
    DensityOperator rho0;
    StepGenerator steps;
    ComplexMatrix povm;
    std::string model_id;

    NoiseProcess(Dims d, DensityOperator rho, StepGenerator gen, ComplexMatrix m, std::string id = "custom")
        : dims(d), rho0(std::move(rho)), steps(std::move(gen)), povm(std::move(m)), model_id(std::move(id)) {
        validate();
    }

    StepNoise step(std::size_t n) const {
        if (!steps) {
            throw std::out_of_range("NoiseProcess: no step generator");
        }
        return steps(n);
    }

    KrausChannel joint_step(std::size_t n) const { return to_joint_channel(step(n), dims); }

    void validate() const {
        if (rho0.dims() != dims) {
            throw DimensionError("NoiseProcess: rho0 dims do not match process dims");
        }
        if (povm.rows() != static_cast<Eigen::Index>(dims.sys) || !is_square(povm)) {
            throw DimensionError("NoiseProcess: POVM element must act on S");
        }
        if (!is_hermitian(povm)) {
            throw std::invalid_argument("NoiseProcess: POVM element not Hermitian");
        }
        if (min_eigenvalue(povm) < -kTolerances.povm || max_eigenvalue(povm) > 1.0 + kTolerances.povm) {
            throw std::invalid_argument("NoiseProcess: POVM element must satisfy 0 <= M <= I");
        }
    }
};

/// Same step noise at every step.
inline StepGenerator constant_steps(StepNoise step) {
    auto shared = std::make_shared<const StepNoise>(std::move(step));
    return [shared](std::size_t) { return *shared; };
}

/// |0...0> on E (x) S with M = |0><0|, under time-independent joint noise.
inline NoiseProcess time_independent_process(const KrausChannel &joint, Dims dims, std::string id) {
    return NoiseProcess(dims, DensityOperator::all_zeros(dims), constant_steps(JointStep{joint}),
                        basis_projector(dims.sys, 0), std::move(id));
}

inline ComplexMatrix two_spin_hamiltonian(double j, double h_x, double h_y) {
    const ComplexMatrix x = pauli_x();
    const ComplexMatrix y = pauli_y();
    const ComplexMatrix i2 = identity(2);
    return j * kron(x, x) + h_x * (kron(x, i2) + kron(i2, x)) + h_y * (kron(y, i2) + kron(i2, y));
}

inline ComplexMatrix xx_spin_hamiltonian(double j_x, double j_y) {
    return j_x * kron(pauli_x(), pauli_x()) + j_y * kron(pauli_y(), pauli_y());
}

/// Closed Ising chain of n spins; spin 0 is S, stored as the last tensor
/// factor. Couplings are j/2 on each ring bond, except n = 2 which uses j X X.
inline ComplexMatrix ising_chain_hamiltonian(std::size_t n, double j, double h_x, double h_y) {
    if (n < 2 || n > 6) {
        throw DimensionError("ising_chain_hamiltonian: n must be in [2, 6]");
    }
    // Spin i sits at tensor position (i + n - 1) % n so spin 0 is last.
    auto site = [n](const ComplexMatrix &op, std::size_t spin) {
        const std::size_t pos = (spin + n - 1) % n;
        ComplexMatrix out = identity(1);
        for (std::size_t k = 0; k < n; ++k) {
            out = kron(out, k == pos ? op : identity(2));
        }
        return out;
    };
    const std::size_t d = std::size_t{1} << n;
    ComplexMatrix h = zeros(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        h += h_x * site(pauli_x(), i) + h_y * site(pauli_y(), i);
    }
    if (n == 2) {
        h += j * site(pauli_x(), 0) * site(pauli_x(), 1);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            h += 0.5 * j * site(pauli_x(), i) * site(pauli_x(), (i + 1) % n);
        }
    }
    return h;
}

/// Weight of the joint (memory-carrying) branch at step n: 1/(1 + e^(n - ell)).
inline double memory_weight(std::size_t n, std::size_t ell) {
    return 1.0 / (1.0 + std::exp(static_cast<double>(n) - static_cast<double>(ell)));
}

/// Step noise that crosses over from joint unitary exp(-i delta H) to a
/// Markovian channel around step ell. The Markovian branch is
/// reset-to-eps o (I_E (x) Lambda_M), with Lambda_M the eps-Markovianization
/// of exp(-i delta_M_factor delta H).
inline StepGenerator finite_memory_schedule(std::size_t ell, double delta, double delta_m_factor,
                                            const ComplexMatrix &h, const DensityOperator &eps, Dims dims) {
    if (ell < 1) {
        throw std::invalid_argument("finite_memory_schedule: ell must be >= 1");
    }
    if (!(delta > 0.0)) {
        throw std::invalid_argument("finite_memory_schedule: delta must be > 0");
    }
    if (h.rows() != static_cast<Eigen::Index>(dims.total())) {
        throw DimensionError("finite_memory_schedule: Hamiltonian must act on E (x) S");
    }
    const KrausChannel joint = hamiltonian_channel(h, delta);
    const KrausChannel markov_s = markovianize(hamiltonian_channel(h, delta_m_factor * delta), dims, eps);
    const KrausChannel branch = reset_after(embed_system(markov_s, dims.env), eps, dims);
    auto parts = std::make_shared<const std::pair<KrausChannel, KrausChannel>>(joint, branch);
    return [parts, ell](std::size_t n) -> StepNoise {
        const double q = memory_weight(n, ell);
        if (q == 1.0) {
            return JointStep{parts->first};
        }
        if (q == 0.0) {
            return JointStep{parts->second};
        }
        return JointStep{mix({{q, parts->first}, {1.0 - q, parts->second}})};
    };
}

/// State-preparation and measurement errors.
struct SpamSpec {
    /// Applied to rho0; acts on E (x) S or on S alone.
    std::optional<KrausChannel> prep;
    /// M -> R^dag M R with R = exp(-i angle Y) on S.
    std::optional<double> meas_rotation;
};

inline NoiseProcess apply_spam(const NoiseProcess &process, const SpamSpec &spam) {
    NoiseProcess out = process;
    if (spam.prep) {
        const KrausChannel &prep = *spam.prep;
        KrausChannel joint = prep.dim() == process.dims.total() ? prep
                             : prep.dim() == process.dims.sys
                                 ? embed_system(prep, process.dims.env)
                                 : throw DimensionError("apply_spam: prep must act on E (x) S or on S");
        ComplexMatrix rho = apply_channel(joint, process.rho0.matrix());
        rho = 0.5 * (rho + rho.adjoint());
        out.rho0 = DensityOperator(rho, process.dims);
    }
    if (spam.meas_rotation) {
        const ComplexMatrix r = hermitian_expm(pauli_y(), *spam.meas_rotation);
        if (process.dims.sys != 2) {
            throw DimensionError("apply_spam: measurement rotation is defined for a qubit S");
        }
        ComplexMatrix m = r.adjoint() * process.povm * r;
        out.povm = 0.5 * (m + m.adjoint());
    }
    out.validate();
    return out;
}

}  // namespace nmrb

#endif  // NMRB_NOISE_MODELS_HPP
