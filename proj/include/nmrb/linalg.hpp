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

#ifndef NMRB_LINALG_HPP
#define NMRB_LINALG_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmrb {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Every numerical tolerance used by contracts and checks in the library.
struct Tolerances {
    double hermitian = 1e-10;
    double trace = 1e-10;
    double psd = 1e-10;
    double unitary = 1e-10;
    double trace_preserving = 1e-10;
    double partial_trace = 1e-12;
    double povm = 1e-10;
    double fidelity_bound = 1e-9;
    double quadrature = 1e-10;
};

inline constexpr Tolerances kTolerances{};

class DimensionError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Which factor of the environment-first product E (x) S.
enum class Subsystem { Environment, System };

/// Dimension split of a system-environment space. Ordering is always E (x) S:
/// basis index = e * sys + s.
struct Dims {
    std::size_t env = 1;
    std::size_t sys = 2;

    std::size_t total() const { return env * sys; }
    bool operator==(const Dims &) const = default;
};

inline ComplexMatrix identity(std::size_t d) {
    return ComplexMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

inline ComplexMatrix zeros(std::size_t rows, std::size_t cols) {
    return ComplexMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline ComplexMatrix pauli_x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline ComplexMatrix pauli_y() {
    ComplexMatrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

inline ComplexMatrix pauli_z() {
    ComplexMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

/// |i><i| in dimension d.
inline ComplexMatrix basis_projector(std::size_t d, std::size_t i) {
    ComplexMatrix m = zeros(d, d);
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    return m;
}

inline double max_abs(const ComplexMatrix &m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const ComplexMatrix &m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const Complex z = m.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            return false;
        }
    }
    return true;
}

inline bool approx_equal(const ComplexMatrix &a, const ComplexMatrix &b, double abs_tol) {
    return a.rows() == b.rows() && a.cols() == b.cols() && max_abs(a - b) <= abs_tol;
}

inline bool is_square(const ComplexMatrix &m) { return m.rows() == m.cols(); }

inline bool is_hermitian(const ComplexMatrix &m, double tol = kTolerances.hermitian) {
    return is_square(m) && max_abs(m - m.adjoint()) <= tol;
}

inline bool is_unitary(const ComplexMatrix &m, double tol = kTolerances.unitary) {
    return is_square(m) && max_abs(m.adjoint() * m - ComplexMatrix::Identity(m.rows(), m.cols())) <= tol;
}

inline void require_finite(const ComplexMatrix &m, const char *what) {
    if (!all_finite(m)) {
        throw NumericError(std::string(what) + ": non-finite entry");
    }
}

/// Kronecker product with index convention (i_a * rb + i_b, j_a * cb + j_b).
inline ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b) {
    const Eigen::Index rb = b.rows();
    const Eigen::Index cb = b.cols();
    ComplexMatrix out(a.rows() * rb, a.cols() * cb);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
        }
    }
    return out;
}

/// Trace over one factor of an operator on E (x) S, keeping the other.
/// Works for any (not necessarily Hermitian) square operator.
inline ComplexMatrix partial_trace(const ComplexMatrix &x, Dims dims, Subsystem keep) {
    const auto de = static_cast<Eigen::Index>(dims.env);
    const auto ds = static_cast<Eigen::Index>(dims.sys);
    if (x.rows() != de * ds || x.cols() != de * ds) {
        throw DimensionError("partial_trace: operator is " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", expected square of dim " +
                             std::to_string(de * ds));
    }
    if (keep == Subsystem::System) {
        ComplexMatrix out = ComplexMatrix::Zero(ds, ds);
        for (Eigen::Index e = 0; e < de; ++e) {
            out += x.block(e * ds, e * ds, ds, ds);
        }
        return out;
    }
    ComplexMatrix out(de, de);
    for (Eigen::Index e = 0; e < de; ++e) {
        for (Eigen::Index f = 0; f < de; ++f) {
            out(e, f) = x.block(e * ds, f * ds, ds, ds).trace();
        }
    }
    return out;
}

/// exp(-i * scale * h) for Hermitian h, via eigendecomposition.
inline ComplexMatrix hermitian_expm(const ComplexMatrix &h, double scale) {
    if (!is_hermitian(h)) {
        throw std::invalid_argument("hermitian_expm: input is not Hermitian within tolerance");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(h);
    if (eig.info() != Eigen::Success) {
        throw NumericError("hermitian_expm: eigendecomposition failed");
    }
    const Eigen::VectorXd &w = eig.eigenvalues();
    ComplexVector phases(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        phases(i) = std::exp(Complex(0.0, -scale * w(i)));
    }
    const ComplexMatrix &v = eig.eigenvectors();
    return v * phases.asDiagonal() * v.adjoint();
}

/// Smallest eigenvalue of the Hermitian part of m.
inline double min_eigenvalue(const ComplexMatrix &m) {
    const ComplexMatrix herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(herm, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const ComplexMatrix &m) {
    const ComplexMatrix herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(herm, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

/// Positive-semidefinite, unit-trace operator on E (x) S with an explicit
/// dimension split. Immutable after construction.
class DensityOperator {
   public:
    DensityOperator(ComplexMatrix matrix, Dims dims) : matrix_(std::move(matrix)), dims_(dims) {
        validate();
    }

    /// Single-factor state (dims = {1, d}).
    static DensityOperator on_system(ComplexMatrix matrix) {
        const auto d = static_cast<std::size_t>(matrix.rows());
        return DensityOperator(std::move(matrix), Dims{1, d});
    }

    static DensityOperator pure(const ComplexVector &ket, Dims dims) {
        const ComplexVector psi = ket / ket.norm();
        return DensityOperator(psi * psi.adjoint(), dims);
    }

    static DensityOperator product(const ComplexMatrix &env_state, const ComplexMatrix &sys_state) {
        return DensityOperator(kron(env_state, sys_state),
                               Dims{static_cast<std::size_t>(env_state.rows()),
                                    static_cast<std::size_t>(sys_state.rows())});
    }

    /// |0...0><0...0| on E (x) S.
    static DensityOperator all_zeros(Dims dims) { return DensityOperator(basis_projector(dims.total(), 0), dims); }

    const ComplexMatrix &matrix() const { return matrix_; }
    Dims dims() const { return dims_; }

    ComplexMatrix reduced_env() const { return partial_trace(matrix_, dims_, Subsystem::Environment); }
    ComplexMatrix reduced_sys() const { return partial_trace(matrix_, dims_, Subsystem::System); }

    bool is_pure(double tol = 1e-10) const {
        return std::abs((matrix_ * matrix_).trace().real() - 1.0) <= tol;
    }

   private:
    void validate() const {
        if (matrix_.rows() != static_cast<Eigen::Index>(dims_.total()) || !is_square(matrix_)) {
            throw DimensionError("DensityOperator: matrix shape does not match d_E*d_S = " +
                                 std::to_string(dims_.total()));
        }
        require_finite(matrix_, "DensityOperator");
        if (!is_hermitian(matrix_, kTolerances.hermitian)) {
            throw std::invalid_argument("DensityOperator: not Hermitian");
        }
        if (std::abs(matrix_.trace() - Complex(1.0, 0.0)) > kTolerances.trace) {
            throw std::invalid_argument("DensityOperator: trace is not 1");
        }
        if (min_eigenvalue(matrix_) < -kTolerances.psd) {
            throw std::invalid_argument("DensityOperator: not positive semidefinite");
        }
    }

    ComplexMatrix matrix_;
    Dims dims_;
};

}  // namespace nmrb

#endif  // NMRB_LINALG_HPP
