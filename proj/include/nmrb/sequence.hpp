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

#ifndef NMRB_SEQUENCE_HPP
#define NMRB_SEQUENCE_HPP

#include <optional>
#include <vector>

#include "nmrb/channel.hpp"
#include "nmrb/linalg.hpp"
#include "nmrb/noise_models.hpp"

namespace nmrb {

/// Joint noise channels for steps 1..count, index 0 holding step 1.
inline std::vector<KrausChannel> joint_steps(const NoiseProcess &process, std::size_t count) {
    std::vector<KrausChannel> out;
    out.reserve(count);
    for (std::size_t n = 1; n <= count; ++n) {
        out.push_back(process.joint_step(n));
    }
    return out;
}

/// Rows of x become (I_E (x) g) x, without forming the Kronecker product.
inline void apply_local_left(ComplexMatrix &x, const ComplexMatrix &g, Dims dims) {
    const auto ds = static_cast<Eigen::Index>(dims.sys);
    Complex tmp[8];
    for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(dims.env); ++e) {
        if (ds > 8) {
            auto blk = x.middleRows(e * ds, ds);
            blk = (g * blk).eval();
            continue;
        }
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            for (Eigen::Index i = 0; i < ds; ++i) {
                Complex acc = 0.0;
                for (Eigen::Index j = 0; j < ds; ++j) {
                    acc += g(i, j) * x(e * ds + j, c);
                }
                tmp[i] = acc;
            }
            for (Eigen::Index i = 0; i < ds; ++i) {
                x(e * ds + i, c) = tmp[i];
            }
        }
    }
}

/// Columns of x become x (I_E (x) g)^dagger.
inline void apply_local_right_adjoint(ComplexMatrix &x, const ComplexMatrix &g, Dims dims) {
    const auto ds = static_cast<Eigen::Index>(dims.sys);
    Complex tmp[8];
    for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(dims.env); ++e) {
        if (ds > 8) {
            auto blk = x.middleCols(e * ds, ds);
            blk = (blk * g.adjoint()).eval();
            continue;
        }
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index i = 0; i < ds; ++i) {
                Complex acc = 0.0;
                for (Eigen::Index j = 0; j < ds; ++j) {
                    acc += x(r, e * ds + j) * std::conj(g(i, j));
                }
                tmp[i] = acc;
            }
            for (Eigen::Index i = 0; i < ds; ++i) {
                x(r, e * ds + i) = tmp[i];
            }
        }
    }
}

/// Precomputed noise for repeated sequence evaluation on one process.
/// When rho0 is pure and every step is a single unitary, the state is
/// propagated as a vector.
class SequenceKernel {
   public:
    /// steps[n-1] is the noise after gate n; the last entry covers the
    /// longest undo step that will be requested.
    SequenceKernel(const NoiseProcess &process, std::vector<KrausChannel> steps)
        : dims_(process.dims), steps_(std::move(steps)), povm_(process.povm) {
        rho0_ = process.rho0.matrix();
        bool unitary = true;
        for (const auto &s : steps_) {
            unitary = unitary && s.size() == 1 && is_unitary(s.kraus().front());
        }
        if (unitary && process.rho0.is_pure(1e-12)) {
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(rho0_);
            const Eigen::Index top = eig.eigenvalues().size() - 1;
            psi0_ = eig.eigenvectors().col(top);
        }
        lifted_povm_ = kron(identity(dims_.env), povm_);
        if (!psi0_ && dims_.total() <= kMaxSuperopDim) {
            for (const auto &st : steps_) {
                // Column-stacked vec(K X K^dag) = (conj(K) (x) K) vec(X).
                const auto d2 = static_cast<Eigen::Index>(dims_.total() * dims_.total());
                ComplexMatrix l = ComplexMatrix::Zero(d2, d2);
                for (const auto &k : st.kraus()) {
                    l += kron(k.conjugate(), k);
                }
                superops_.push_back(std::move(l));
            }
        }
    }

    std::size_t max_length() const { return steps_.empty() ? 0 : steps_.size() - 1; }
    bool uses_state_vector() const { return psi0_.has_value(); }

    double fidelity(const std::vector<ComplexMatrix> &gates) const {
        const std::size_t m = gates.size();
        if (m + 1 > steps_.size()) {
            throw std::out_of_range("sequence_fidelity: need noise for steps 1..m+1");
        }
        ComplexMatrix total = identity(dims_.sys);
        for (std::size_t n = 0; n < m; ++n) {
            const ComplexMatrix &g = gates[n];
            if (g.rows() != static_cast<Eigen::Index>(dims_.sys) || !is_unitary(g)) {
                throw std::invalid_argument("sequence_fidelity: gate " + std::to_string(n + 1) +
                                            " is not a unitary on S");
            }
            total = (g * total).eval();
        }
        const ComplexMatrix undo = total.adjoint();
        if (psi0_) {
            ComplexMatrix psi = *psi0_;
            ComplexMatrix tmp(psi.rows(), 1);
            for (std::size_t n = 0; n <= m; ++n) {
                apply_local_left(psi, n < m ? gates[n] : undo, dims_);
                tmp.noalias() = steps_[n].kraus().front() * psi;
                psi.swap(tmp);
            }
            return (psi.adjoint() * lifted_povm_ * psi)(0, 0).real();
        }
        ComplexMatrix rho = rho0_;
        ComplexMatrix buf(rho.rows(), rho.cols());
        for (std::size_t n = 0; n <= m; ++n) {
            const ComplexMatrix &g = n < m ? gates[n] : undo;
            apply_local_left(rho, g, dims_);
            apply_local_right_adjoint(rho, g, dims_);
            if (superops_.empty()) {
                rho = apply_channel(steps_[n], rho);
            } else {
                Eigen::Map<ComplexVector> out(buf.data(), buf.size());
                out.noalias() = superops_[n] * Eigen::Map<const ComplexVector>(rho.data(), rho.size());
                rho.swap(buf);
            }
        }
        return (lifted_povm_ * rho).trace().real();
    }

   private:
    /// Largest joint dimension for which step superoperators are cached.
    static constexpr std::size_t kMaxSuperopDim = 8;

    Dims dims_;
    std::vector<KrausChannel> steps_;
    std::vector<ComplexMatrix> superops_;
    ComplexMatrix povm_;
    ComplexMatrix lifted_povm_;
    ComplexMatrix rho0_;
    std::optional<ComplexMatrix> psi0_;
};

/// Survival probability tr[(I_E (x) M) rho_final] of one gate sequence:
/// each gate on S followed by its step noise, then the undo gate
/// (G_m ... G_1)^dagger followed by the step m + 1 noise.
inline double sequence_fidelity(const NoiseProcess &process, const std::vector<ComplexMatrix> &gates) {
    return SequenceKernel(process, joint_steps(process, gates.size() + 1)).fidelity(gates);
}

}  // namespace nmrb

#endif  // NMRB_SEQUENCE_HPP
