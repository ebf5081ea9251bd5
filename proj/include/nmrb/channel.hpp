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

#ifndef NMRB_CHANNEL_HPP
#define NMRB_CHANNEL_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nmrb/linalg.hpp"
#include "nmrb/random.hpp"

namespace nmrb {

enum class TpFlag { Preserving, NonIncreasing, Unchecked };

inline const char *to_string(TpFlag f) {
    switch (f) {
        case TpFlag::Preserving:
            return "preserving";
        case TpFlag::NonIncreasing:
            return "non_increasing";
        case TpFlag::Unchecked:
            return "unchecked";
    }
    return "unchecked";
}

/// Completely positive map x -> sum_k K_k x K_k^dagger on a d-dimensional
/// space. The trace flag is verified at construction.
class KrausChannel {
   public:
    KrausChannel(std::vector<ComplexMatrix> kraus, TpFlag flag = TpFlag::Preserving)
        : kraus_(std::move(kraus)), flag_(flag) {
        validate();
    }

    static KrausChannel identity(std::size_t d) { return KrausChannel({nmrb::identity(d)}); }

    static KrausChannel unitary(const ComplexMatrix &u) {
        if (!is_unitary(u)) {
            throw std::invalid_argument("KrausChannel::unitary: matrix is not unitary");
        }
        return KrausChannel({u});
    }

    const std::vector<ComplexMatrix> &kraus() const { return kraus_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return kraus_.size(); }
    TpFlag tp_flag() const { return flag_; }

    /// sum_k K_k^dagger K_k.
    ComplexMatrix gram() const {
        ComplexMatrix g = zeros(dim_, dim_);
        for (const auto &k : kraus_) {
            g.noalias() += k.adjoint() * k;
        }
        return g;
    }

    bool is_trace_preserving(double tol = kTolerances.trace_preserving) const {
        return max_abs(gram() - nmrb::identity(dim_)) <= tol;
    }

   private:
    void validate() {
        if (kraus_.empty()) {
            throw std::invalid_argument("KrausChannel: empty Kraus list");
        }
        const Eigen::Index d = kraus_.front().rows();
        for (const auto &k : kraus_) {
            if (k.rows() != d || k.cols() != d) {
                throw DimensionError("KrausChannel: Kraus operators must all be square of equal size");
            }
            require_finite(k, "KrausChannel");
        }
        dim_ = static_cast<std::size_t>(d);
        if (flag_ == TpFlag::Preserving && !is_trace_preserving()) {
            throw std::invalid_argument("KrausChannel: flagged trace-preserving but sum K^dag K != I");
        }
        if (flag_ == TpFlag::NonIncreasing && max_eigenvalue(gram()) > 1.0 + kTolerances.trace_preserving) {
            throw std::invalid_argument("KrausChannel: flagged trace-non-increasing but sum K^dag K > I");
        }
    }

    std::vector<ComplexMatrix> kraus_;
    std::size_t dim_ = 0;
    TpFlag flag_;
};

inline void require_channel_dim(const KrausChannel &ch, std::size_t d, const char *what) {
    if (ch.dim() != d) {
        throw DimensionError(std::string(what) + ": channel acts on dim " + std::to_string(ch.dim()) +
                             ", expected " + std::to_string(d));
    }
}

inline ComplexMatrix apply_channel(const KrausChannel &ch, const ComplexMatrix &x) {
    if (x.rows() != static_cast<Eigen::Index>(ch.dim()) || !is_square(x)) {
        throw DimensionError("apply_channel: operator dim " + std::to_string(x.rows()) +
                             " does not match channel dim " + std::to_string(ch.dim()));
    }
    ComplexMatrix out = ComplexMatrix::Zero(x.rows(), x.cols());
    for (const auto &k : ch.kraus()) {
        out.noalias() += k * x * k.adjoint();
    }
    return out;
}

/// Weaker of two trace flags.
inline TpFlag combine_flags(TpFlag a, TpFlag b) {
    if (a == TpFlag::Unchecked || b == TpFlag::Unchecked) {
        return TpFlag::Unchecked;
    }
    if (a == TpFlag::NonIncreasing || b == TpFlag::NonIncreasing) {
        return TpFlag::NonIncreasing;
    }
    return TpFlag::Preserving;
}

/// Choi matrix sum_k vec(K) vec(K)^dagger with column-stacking vec.
inline ComplexMatrix choi_matrix(const KrausChannel &ch) {
    const auto d = static_cast<Eigen::Index>(ch.dim());
    ComplexMatrix c = ComplexMatrix::Zero(d * d, d * d);
    for (const auto &k : ch.kraus()) {
        const Eigen::Map<const ComplexVector> v(k.data(), d * d);
        c.noalias() += v * v.adjoint();
    }
    return c;
}

/// Minimal Kraus representation from the Choi eigendecomposition.
inline KrausChannel canonical_kraus(const KrausChannel &ch) {
    const auto d = static_cast<Eigen::Index>(ch.dim());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(choi_matrix(ch));
    if (eig.info() != Eigen::Success) {
        throw NumericError("canonical_kraus: Choi eigendecomposition failed");
    }
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    std::vector<ComplexMatrix> ops;
    for (Eigen::Index i = eig.eigenvalues().size() - 1; i >= 0; --i) {
        const double w = eig.eigenvalues()(i);
        if (w <= 1e-14 * std::max(top, 1.0)) {
            continue;
        }
        ComplexVector v = eig.eigenvectors().col(i) * std::sqrt(w);
        ops.emplace_back(Eigen::Map<ComplexMatrix>(v.data(), d, d));
    }
    if (ops.empty()) {
        ops.push_back(zeros(ch.dim(), ch.dim()));
    }
    KrausChannel out(std::move(ops), TpFlag::Unchecked);
    if (ch.tp_flag() == TpFlag::Preserving && out.is_trace_preserving()) {
        return KrausChannel(out.kraus(), TpFlag::Preserving);
    }
    return out;
}

/// outer o inner. Kraus lists longer than d^2 are compressed for d <= 16.
inline KrausChannel compose(const KrausChannel &outer, const KrausChannel &inner) {
    require_channel_dim(outer, inner.dim(), "compose");
    std::vector<ComplexMatrix> ops;
    ops.reserve(outer.size() * inner.size());
    for (const auto &a : outer.kraus()) {
        for (const auto &b : inner.kraus()) {
            ops.emplace_back(a * b);
        }
    }
    const TpFlag flag = combine_flags(outer.tp_flag(), inner.tp_flag());
    KrausChannel out(std::move(ops), flag == TpFlag::Preserving ? TpFlag::Unchecked : flag);
    const std::size_t d = out.dim();
    if (out.size() > d * d && d <= 16) {
        out = canonical_kraus(out);
    }
    if (flag == TpFlag::Preserving && out.is_trace_preserving()) {
        return KrausChannel(out.kraus(), TpFlag::Preserving);
    }
    return out;
}

/// Convex mixture sum_i w_i ch_i, realized by scaling Kraus operators.
inline KrausChannel mix(const std::vector<std::pair<double, KrausChannel>> &parts) {
    if (parts.empty()) {
        throw std::invalid_argument("mix: no components");
    }
    std::vector<ComplexMatrix> ops;
    TpFlag flag = TpFlag::Preserving;
    double total = 0.0;
    for (const auto &[w, ch] : parts) {
        if (w < 0.0) {
            throw std::invalid_argument("mix: negative weight");
        }
        require_channel_dim(ch, parts.front().second.dim(), "mix");
        total += w;
        flag = combine_flags(flag, ch.tp_flag());
        if (w == 0.0) {
            continue;
        }
        const double s = std::sqrt(w);
        for (const auto &k : ch.kraus()) {
            ops.emplace_back(s * k);
        }
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("mix: weights must sum to 1");
    }
    return KrausChannel(std::move(ops), flag);
}

/// I_E (x) ch on E (x) S.
inline KrausChannel embed_system(const KrausChannel &ch, std::size_t d_env) {
    std::vector<ComplexMatrix> ops;
    const ComplexMatrix ie = identity(d_env);
    for (const auto &k : ch.kraus()) {
        ops.emplace_back(kron(ie, k));
    }
    return KrausChannel(std::move(ops), ch.tp_flag());
}

/// Kraus operators of the environment reset X -> eps (x) tr_E X on E (x) S.
inline std::vector<ComplexMatrix> reset_kraus(const ComplexMatrix &eps, Dims dims) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(eps);
    std::vector<ComplexMatrix> ops;
    const ComplexMatrix is = identity(dims.sys);
    for (Eigen::Index j = 0; j < eig.eigenvalues().size(); ++j) {
        const double w = eig.eigenvalues()(j);
        if (w <= 1e-15) {
            continue;
        }
        const ComplexVector phi = eig.eigenvectors().col(j) * std::sqrt(w);
        for (std::size_t i = 0; i < dims.env; ++i) {
            ComplexMatrix ket_bra = zeros(dims.env, dims.env);
            ket_bra.col(static_cast<Eigen::Index>(i)) = phi;
            ops.emplace_back(kron(ket_bra, is));
        }
    }
    return ops;
}

/// Reset-to-eps after ch: X -> eps (x) tr_E[ch(X)].
inline KrausChannel reset_after(const KrausChannel &ch, const DensityOperator &eps, Dims dims) {
    require_channel_dim(ch, dims.total(), "reset_after");
    if (eps.dims().total() != dims.env) {
        throw DimensionError("reset_after: eps must act on E");
    }
    const KrausChannel reset(reset_kraus(eps.matrix(), dims), TpFlag::Unchecked);
    std::vector<ComplexMatrix> ops;
    for (const auto &r : reset.kraus()) {
        for (const auto &k : ch.kraus()) {
            ops.emplace_back(r * k);
        }
    }
    KrausChannel out(std::move(ops), TpFlag::Unchecked);
    if (ch.tp_flag() == TpFlag::Preserving && out.is_trace_preserving()) {
        return KrausChannel(out.kraus(), TpFlag::Preserving);
    }
    return out;
}

/// Partial trace over S of an operator on E (x) S.
inline ComplexMatrix trace_system(const ComplexMatrix &op, Dims dims) {
    return partial_trace(op, dims, Subsystem::Environment);
}

inline void require_env_operator(const ComplexMatrix &eps, Dims dims, const char *what) {
    if (eps.rows() != static_cast<Eigen::Index>(dims.env) || !is_square(eps)) {
        throw DimensionError(std::string(what) + ": environment operator must be " + std::to_string(dims.env) +
                             "x" + std::to_string(dims.env));
    }
}

/// eps -> sum_k tr_S(K_k) eps tr_S(K_k)^dagger.
inline ComplexMatrix dollar_map(const KrausChannel &ch, Dims dims, const ComplexMatrix &eps) {
    require_channel_dim(ch, dims.total(), "dollar_map");
    require_env_operator(eps, dims, "dollar_map");
    ComplexMatrix out = ComplexMatrix::Zero(eps.rows(), eps.cols());
    for (const auto &k : ch.kraus()) {
        const ComplexMatrix t = trace_system(k, dims);
        out.noalias() += t * eps * t.adjoint();
    }
    return out;
}

/// eps -> tr_S[ch(eps (x) I/d_S)].
inline ComplexMatrix theta_map(const KrausChannel &ch, Dims dims, const ComplexMatrix &eps) {
    require_channel_dim(ch, dims.total(), "theta_map");
    require_env_operator(eps, dims, "theta_map");
    const ComplexMatrix embedded = kron(eps, identity(dims.sys) / static_cast<double>(dims.sys));
    return trace_system(apply_channel(ch, embedded), dims);
}

/// Environment-side superoperator distilled from a channel on E (x) S.
struct EnvSuperOp {
    enum class Kind { Dollar, Theta, DollarMinusTheta };

    Kind kind;
    KrausChannel source;
    Dims dims;

    ComplexMatrix apply(const ComplexMatrix &eps) const {
        switch (kind) {
            case Kind::Dollar:
                return dollar_map(source, dims, eps);
            case Kind::Theta:
                return theta_map(source, dims, eps);
            case Kind::DollarMinusTheta:
                return dollar_map(source, dims, eps) - theta_map(source, dims, eps);
        }
        return eps;
    }
};

namespace detail {

/// (I/d_S on a fresh slot) -> (ch on E (x) S_fresh) -> trace S_fresh, with the
/// original S spectating. Works on the space E (x) S_fresh (x) S.
inline ComplexMatrix extend_theta(const KrausChannel &ch, Dims dims, const ComplexMatrix &x) {
    const auto de = static_cast<Eigen::Index>(dims.env);
    const auto ds = static_cast<Eigen::Index>(dims.sys);
    const Eigen::Index big = de * ds * ds;
    // x on E (x) S  ->  x' on E (x) S_fresh (x) S with I/d_S in the fresh slot.
    ComplexMatrix y = ComplexMatrix::Zero(big, big);
    const double inv = 1.0 / static_cast<double>(ds);
    for (Eigen::Index e = 0; e < de; ++e) {
        for (Eigen::Index s = 0; s < ds; ++s) {
            for (Eigen::Index f = 0; f < de; ++f) {
                for (Eigen::Index t = 0; t < ds; ++t) {
                    const Complex v = x(e * ds + s, f * ds + t) * inv;
                    for (Eigen::Index a = 0; a < ds; ++a) {
                        y((e * ds + a) * ds + s, (f * ds + a) * ds + t) = v;
                    }
                }
            }
        }
    }
    const ComplexMatrix is = identity(dims.sys);
    ComplexMatrix z = ComplexMatrix::Zero(big, big);
    for (const auto &k : ch.kraus()) {
        const ComplexMatrix kk = kron(k, is);
        z.noalias() += kk * y * kk.adjoint();
    }
    // Trace out the fresh slot (middle factor).
    ComplexMatrix out = ComplexMatrix::Zero(de * ds, de * ds);
    for (Eigen::Index e = 0; e < de; ++e) {
        for (Eigen::Index s = 0; s < ds; ++s) {
            for (Eigen::Index f = 0; f < de; ++f) {
                for (Eigen::Index t = 0; t < ds; ++t) {
                    Complex acc = 0.0;
                    for (Eigen::Index a = 0; a < ds; ++a) {
                        acc += z((e * ds + a) * ds + s, (f * ds + a) * ds + t);
                    }
                    out(e * ds + s, f * ds + t) = acc;
                }
            }
        }
    }
    return out;
}

inline ComplexMatrix extend_dollar(const KrausChannel &ch, Dims dims, const ComplexMatrix &x) {
    const ComplexMatrix is = identity(dims.sys);
    ComplexMatrix out = ComplexMatrix::Zero(x.rows(), x.cols());
    for (const auto &k : ch.kraus()) {
        const ComplexMatrix t = kron(trace_system(k, dims), is);
        out.noalias() += t * x * t.adjoint();
    }
    return out;
}

}  // namespace detail

/// Applies an environment superoperator to the E factor of an operator on
/// E (x) S, leaving S as a spectator.
inline ComplexMatrix extend_env_superop(const EnvSuperOp &op, const ComplexMatrix &x) {
    if (x.rows() != static_cast<Eigen::Index>(op.dims.total()) || !is_square(x)) {
        throw DimensionError("extend_env_superop: operator must be square of dim d_E*d_S");
    }
    require_channel_dim(op.source, op.dims.total(), "extend_env_superop");
    switch (op.kind) {
        case EnvSuperOp::Kind::Dollar:
            return detail::extend_dollar(op.source, op.dims, x);
        case EnvSuperOp::Kind::Theta:
            return detail::extend_theta(op.source, op.dims, x);
        case EnvSuperOp::Kind::DollarMinusTheta:
            return detail::extend_dollar(op.source, op.dims, x) - detail::extend_theta(op.source, op.dims, x);
    }
    return x;
}

/// sigma -> tr_E[ch(eps (x) sigma)] as a channel on S. A mixed eps is
/// eigendecomposed; each eigenvector contributes weighted Kraus operators.
inline KrausChannel markovianize(const KrausChannel &ch, Dims dims, const DensityOperator &eps,
                                 bool require_pure = false) {
    require_channel_dim(ch, dims.total(), "markovianize");
    if (eps.dims().total() != dims.env) {
        throw DimensionError("markovianize: eps must act on E");
    }
    if (require_pure && !eps.is_pure()) {
        throw std::invalid_argument("markovianize: eps is required to be pure");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(eps.matrix());
    const auto de = static_cast<Eigen::Index>(dims.env);
    const auto ds = static_cast<Eigen::Index>(dims.sys);
    std::vector<ComplexMatrix> ops;
    for (Eigen::Index j = 0; j < de; ++j) {
        const double w = eig.eigenvalues()(j);
        if (w <= 1e-15) {
            continue;
        }
        const ComplexVector phi = eig.eigenvectors().col(j);
        const double sw = std::sqrt(w);
        for (const auto &k : ch.kraus()) {
            for (Eigen::Index i = 0; i < de; ++i) {
                // <e_i| K (|phi> (x) .)
                ComplexMatrix a = ComplexMatrix::Zero(ds, ds);
                for (Eigen::Index f = 0; f < de; ++f) {
                    if (phi(f) != Complex(0.0, 0.0)) {
                        a += phi(f) * k.block(i * ds, f * ds, ds, ds);
                    }
                }
                ops.emplace_back(sw * a);
            }
        }
    }
    KrausChannel out(std::move(ops), TpFlag::Unchecked);
    if (ch.tp_flag() == TpFlag::Preserving && out.is_trace_preserving()) {
        return KrausChannel(out.kraus(), TpFlag::Preserving);
    }
    return out;
}

/// Markovianization against |0><0| on E.
inline KrausChannel markovianize(const KrausChannel &ch, Dims dims) {
    return markovianize(ch, dims, DensityOperator::on_system(basis_projector(dims.env, 0)), true);
}

/// tr[ch] = sum_k |tr K_k|^2.
inline double channel_trace(const KrausChannel &ch) {
    double t = 0.0;
    for (const auto &k : ch.kraus()) {
        t += std::norm(k.trace());
    }
    return t;
}

struct NoiseStrength {
    double p = 0.0;
    /// False when p falls outside [0, 1] beyond rounding.
    bool in_range = true;
};

/// p = (tr[ch] - 1) / (d^2 - 1).
inline NoiseStrength noise_strength(const KrausChannel &ch) {
    const auto d = static_cast<double>(ch.dim());
    if (ch.dim() < 2) {
        throw DimensionError("noise_strength: dimension must be >= 2");
    }
    const double p = (channel_trace(ch) - 1.0) / (d * d - 1.0);
    return {p, p >= -1e-12 && p <= 1.0 + 1e-12};
}

/// Unitary channel exp(-i scale h).
inline KrausChannel hamiltonian_channel(const ComplexMatrix &h, double scale) {
    return KrausChannel({hermitian_expm(h, scale)});
}

/// Random TP channel on dimension d with r Kraus operators, from the first d
/// columns of a Haar unitary on d*r (a random Stinespring isometry).
inline KrausChannel random_cptp_channel(std::size_t d, std::size_t r, SeededRng &rng) {
    const ComplexMatrix u = haar_random_unitary(d * r, rng);
    const auto n = static_cast<Eigen::Index>(d);
    std::vector<ComplexMatrix> ops;
    for (std::size_t k = 0; k < r; ++k) {
        ops.emplace_back(u.block(static_cast<Eigen::Index>(k) * n, 0, n, n));
    }
    return KrausChannel(std::move(ops));
}

inline KrausChannel random_unitary_channel(std::size_t d, SeededRng &rng) {
    return KrausChannel({haar_random_unitary(d, rng)});
}

}  // namespace nmrb

#endif  // NMRB_CHANNEL_HPP
