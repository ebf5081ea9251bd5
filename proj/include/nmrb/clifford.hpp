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

#ifndef NMRB_CLIFFORD_HPP
#define NMRB_CLIFFORD_HPP

#include <cmath>
#include <string>
#include <vector>

#include "nmrb/channel.hpp"
#include "nmrb/linalg.hpp"

namespace nmrb {

/// Finite set of unitaries sampled uniformly.
class GateSet {
   public:
    GateSet(std::string name, std::vector<ComplexMatrix> gates) : name_(std::move(name)), gates_(std::move(gates)) {
        if (gates_.empty()) {
            throw std::invalid_argument("GateSet: empty");
        }
        for (const auto &g : gates_) {
            if (!is_unitary(g) || g.rows() != gates_.front().rows()) {
                throw std::invalid_argument("GateSet: gates must be unitaries of equal dimension");
            }
        }
    }

    /// The 24 single-qubit Cliffords modulo phase, generated by closure of
    /// {H, S} and normalized so the first nonzero entry is real positive.
    static const GateSet &clifford24() {
        static const GateSet set = [] {
            const double r = 1.0 / std::sqrt(2.0);
            ComplexMatrix h(2, 2);
            h << r, r, r, -r;
            ComplexMatrix s(2, 2);
            s << 1, 0, 0, Complex(0, 1);
            std::vector<ComplexMatrix> found{identity(2)};
            std::vector<ComplexMatrix> frontier{identity(2)};
            while (!frontier.empty()) {
                std::vector<ComplexMatrix> next;
                for (const auto &g : frontier) {
                    for (const ComplexMatrix *gen : {&h, &s}) {
                        const ComplexMatrix n = canonical_phase(*gen * g);
                        bool seen = false;
                        for (const auto &c : found) {
                            if (equal_up_to_phase(c, n)) {
                                seen = true;
                                break;
                            }
                        }
                        if (!seen) {
                            found.push_back(n);
                            next.push_back(n);
                        }
                    }
                }
                frontier = std::move(next);
            }
            return GateSet("clifford24", std::move(found));
        }();
        return set;
    }

    const std::string &name() const { return name_; }
    const std::vector<ComplexMatrix> &gates() const { return gates_; }
    std::size_t size() const { return gates_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(gates_.front().rows()); }
    const ComplexMatrix &operator[](std::size_t i) const { return gates_[i]; }

    /// (1/|G|^2) sum |tr(g^dag h)|^4; equals 2 exactly for a unitary 2-design.
    double frame_potential() const {
        double acc = 0.0;
        for (const auto &g : gates_) {
            for (const auto &h : gates_) {
                acc += std::pow(std::abs((g.adjoint() * h).trace()), 4);
            }
        }
        return acc / static_cast<double>(gates_.size() * gates_.size());
    }

    bool is_unitary_2design(double tol = 1e-9) const { return std::abs(frame_potential() - 2.0) <= tol; }

    static ComplexMatrix canonical_phase(const ComplexMatrix &g) {
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const Complex z = g.data()[i];
            if (std::abs(z) > 1e-9) {
                return g * (std::abs(z) / z);
            }
        }
        return g;
    }

    static bool equal_up_to_phase(const ComplexMatrix &a, const ComplexMatrix &b) {
        return std::abs(std::abs((a.adjoint() * b).trace()) - static_cast<double>(a.rows())) < 1e-9;
    }

   private:
    std::string name_;
    std::vector<ComplexMatrix> gates_;
};

/// Liouville matrix sum_k K (x) conj(K), acting on row-major vectorizations.
inline ComplexMatrix liouville(const KrausChannel &ch) {
    const auto d = static_cast<Eigen::Index>(ch.dim());
    ComplexMatrix s = ComplexMatrix::Zero(d * d, d * d);
    for (const auto &k : ch.kraus()) {
        s += kron(k, k.conjugate());
    }
    return s;
}

struct TwirlResult {
    double p = 0.0;
    /// Max deviation of the twirled map from p X + (1 - p) tr(X) I/d form,
    /// allowing a free identity component (so non-TP inputs are also fit).
    double residual = 0.0;
};

/// Group average (1/|G|) sum G^dag ch(G . G^dag) G fit to a depolarizing map.
inline TwirlResult clifford_twirl(const KrausChannel &ch, const GateSet &group) {
    require_channel_dim(ch, group.dim(), "clifford_twirl");
    if (!group.is_unitary_2design()) {
        throw std::invalid_argument("clifford_twirl: gate set is not a unitary 2-design");
    }
    const auto d = static_cast<Eigen::Index>(ch.dim());
    const ComplexMatrix s = liouville(ch);
    ComplexMatrix t = ComplexMatrix::Zero(d * d, d * d);
    for (const auto &g : group.gates()) {
        const ComplexMatrix sg = kron(g, g.conjugate());
        t += sg.adjoint() * s * sg;
    }
    t /= static_cast<double>(group.size());

    ComplexVector vec_i = ComplexVector::Zero(d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        vec_i(i * d + i) = 1.0;
    }
    const ComplexMatrix proj = vec_i * vec_i.adjoint() / static_cast<double>(d);
    const ComplexMatrix ident = ComplexMatrix::Identity(d * d, d * d);
    const double dd = static_cast<double>(d * d);
    const double p = ((t * (ident - proj)).trace().real()) / (dd - 1.0);
    const double c = (t * proj).trace().real();
    const ComplexMatrix fitted = p * (ident - proj) + c * proj;
    return {p, max_abs(t - fitted)};
}

}  // namespace nmrb

#endif  // NMRB_CLIFFORD_HPP
