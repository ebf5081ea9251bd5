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

#include <cmath>

#include <gtest/gtest.h>

#include "nmrb/channel.hpp"
#include "nmrb/clifford.hpp"
#include "nmrb/random.hpp"

namespace nmrb {
namespace {

/// p from the group average applied to each Pauli: (1/3) sum_P tr[P T(P)]/2.
double enumerated_twirl_p(const KrausChannel &ch) {
    const GateSet &g = GateSet::clifford24();
    double acc = 0.0;
    for (const ComplexMatrix &p : {pauli_x(), pauli_y(), pauli_z()}) {
        ComplexMatrix t = zeros(2, 2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            t += g[i].adjoint() * apply_channel(ch, g[i] * p * g[i].adjoint()) * g[i];
        }
        t /= static_cast<double>(g.size());
        acc += (p * t).trace().real() / 2.0;
    }
    return acc / 3.0;
}

TEST(Clifford24, HasTwentyFourDistinctElements) {
    const GateSet &g = GateSet::clifford24();
    ASSERT_EQ(g.size(), 24u);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_TRUE(is_unitary(g[i]));
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            EXPECT_FALSE(GateSet::equal_up_to_phase(g[i], g[j])) << i << " vs " << j;
        }
    }
}

TEST(Clifford24, IsClosedUnderMultiplication) {
    const GateSet &g = GateSet::clifford24();
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            const ComplexMatrix prod = g[i] * g[j];
            bool found = false;
            for (std::size_t k = 0; k < g.size() && !found; ++k) {
                found = GateSet::equal_up_to_phase(prod, g[k]);
            }
            EXPECT_TRUE(found);
        }
    }
}

TEST(Clifford24, FramePotentialIsTwo) {
    EXPECT_NEAR(GateSet::clifford24().frame_potential(), 2.0, 1e-12);
    EXPECT_TRUE(GateSet::clifford24().is_unitary_2design());
}

TEST(GateSet, PauliGroupIsNotATwoDesign) {
    const GateSet paulis("pauli", {identity(2), pauli_x(), pauli_y(), pauli_z()});
    EXPECT_NEAR(paulis.frame_potential(), 4.0, 1e-12);
    EXPECT_FALSE(paulis.is_unitary_2design());
    EXPECT_THROW(clifford_twirl(KrausChannel::identity(2), paulis), std::invalid_argument);
    EXPECT_THROW(GateSet("bad", {identity(2) * 2.0}), std::invalid_argument);
}

TEST(CliffordTwirl, IdentityChannelGivesOne) {
    const TwirlResult r = clifford_twirl(KrausChannel::identity(2), GateSet::clifford24());
    EXPECT_NEAR(r.p, 1.0, 1e-14);
    EXPECT_LE(r.residual, 1e-14);
}

TEST(CliffordTwirl, DephasingMatchesClosedForm) {
    const double delta = 0.1;
    const KrausChannel deph = hamiltonian_channel(pauli_z(), delta);
    const double c = std::cos(delta);
    const TwirlResult r = clifford_twirl(deph, GateSet::clifford24());
    EXPECT_NEAR(r.p, (4.0 * c * c - 1.0) / 3.0, 1e-14);
    EXPECT_LE(r.residual, 1e-13);
}

TEST(CliffordTwirl, AgreesWithTraceFormulaAndEnumeration) {
    SeededRng rng(31);
    for (int i = 0; i < 20; ++i) {
        const KrausChannel ch = random_cptp_channel(2, 1 + i % 4, rng);
        const TwirlResult r = clifford_twirl(ch, GateSet::clifford24());
        EXPECT_NEAR(r.p, noise_strength(ch).p, 1e-10);
        EXPECT_NEAR(r.p, enumerated_twirl_p(ch), 1e-10);
        EXPECT_LE(r.residual, 1e-10);
    }
}

TEST(Liouville, ActsOnRowMajorVectorization) {
    SeededRng rng(32);
    const KrausChannel ch = random_cptp_channel(2, 2, rng);
    const ComplexMatrix rho = random_density_matrix(2, rng);
    ComplexVector v(4);
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            v(i * 2 + j) = rho(i, j);
        }
    }
    const ComplexVector out = liouville(ch) * v;
    const ComplexMatrix expected = apply_channel(ch, rho);
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            EXPECT_NEAR(std::abs(out(i * 2 + j) - expected(i, j)), 0.0, 1e-14);
        }
    }
}

}  // namespace
}  // namespace nmrb
