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

#include "nmrb/asf.hpp"
#include "nmrb/rb_sim.hpp"
#include "nmrb/sequence.hpp"

namespace nmrb {
namespace {

const Dims kPair{2, 2};

NoiseProcess two_spin_process() {
    return time_independent_process(hamiltonian_channel(two_spin_hamiltonian(1.7, 1.47, -1.05), 0.029475), kPair,
                                    "two_spin");
}

/// Survival probability of one gate list by explicit lifting and Kraus sums.
double plain_fidelity(const NoiseProcess &p, const std::vector<ComplexMatrix> &gates) {
    const ComplexMatrix ie = identity(p.dims.env);
    ComplexMatrix rho = p.rho0.matrix();
    ComplexMatrix total = identity(2);
    for (std::size_t n = 0; n <= gates.size(); ++n) {
        const ComplexMatrix g = n < gates.size() ? gates[n] : ComplexMatrix(total.adjoint());
        const ComplexMatrix lg = kron(ie, g);
        rho = apply_channel(p.joint_step(n + 1), lg * rho * lg.adjoint());
        if (n < gates.size()) {
            total = (gates[n] * total).eval();
        }
    }
    return (kron(ie, p.povm) * rho).trace().real();
}

std::vector<ComplexMatrix> random_gates(std::size_t m, SeededRng &rng) {
    std::vector<ComplexMatrix> g;
    for (std::size_t i = 0; i < m; ++i) {
        g.push_back(haar_random_unitary(2, rng));
    }
    return g;
}

RBRunConfig config(std::vector<std::size_t> ms, std::size_t samples, std::uint64_t seed) {
    RBRunConfig c;
    c.m_values = std::move(ms);
    c.samples_per_m = samples;
    c.seed = seed;
    return c;
}

TEST(SequenceKernel, StateVectorPathMatchesPlainPropagation) {
    SeededRng rng(61);
    const NoiseProcess p = two_spin_process();
    const SequenceKernel k(p, joint_steps(p, 9));
    ASSERT_TRUE(k.uses_state_vector());
    for (std::size_t m : {0u, 1u, 3u, 8u}) {
        const auto g = random_gates(m, rng);
        EXPECT_NEAR(k.fidelity(g), plain_fidelity(p, g), 1e-12);
    }
}

TEST(SequenceKernel, SuperoperatorPathMatchesPlainPropagation) {
    SeededRng rng(62);
    const ComplexMatrix rho = random_density_matrix(4, rng);
    const NoiseProcess p(kPair, DensityOperator(rho, kPair),
                         constant_steps(JointStep{random_cptp_channel(4, 3, rng)}), random_density_matrix(2, rng));
    const SequenceKernel k(p, joint_steps(p, 7));
    ASSERT_FALSE(k.uses_state_vector());
    for (std::size_t m : {1u, 2u, 6u}) {
        const auto g = random_gates(m, rng);
        EXPECT_NEAR(k.fidelity(g), plain_fidelity(p, g), 1e-12);
    }
}

TEST(SequenceKernel, KrausPathMatchesPlainPropagation) {
    // d_E = 8 exceeds the superoperator cache bound.
    SeededRng rng(63);
    const Dims dims{8, 2};
    const ComplexMatrix rho = random_density_matrix(16, rng);
    const NoiseProcess p(dims, DensityOperator(rho, dims), constant_steps(JointStep{random_cptp_channel(16, 2, rng)}),
                         basis_projector(2, 0));
    const SequenceKernel k(p, joint_steps(p, 5));
    for (std::size_t m : {1u, 4u}) {
        const auto g = random_gates(m, rng);
        EXPECT_NEAR(k.fidelity(g), plain_fidelity(p, g), 1e-12);
    }
}

TEST(SequenceKernel, RejectsBadGatesAndShortNoise) {
    const NoiseProcess p = two_spin_process();
    const SequenceKernel k(p, joint_steps(p, 3));
    EXPECT_THROW(k.fidelity({identity(2) * 2.0}), std::invalid_argument);
    EXPECT_THROW(k.fidelity({identity(2), identity(2), identity(2)}), std::out_of_range);
}

TEST(SequenceFidelity, AveragingAllCliffordsGivesAnalyticalValue) {
    const NoiseProcess p = two_spin_process();
    const GateSet &cl = GateSet::clifford24();
    double acc = 0.0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
        acc += sequence_fidelity(p, {cl[i]});
    }
    EXPECT_NEAR(acc / 24.0, asf_analytical(p, 1), 1e-13);
}

TEST(SequenceFidelity, SingleDephasingStepByHand) {
    // Hadamard, Z-rotation noise by delta, undo, Z-rotation again:
    // the state |+> dephases once, so F = (1 + cos 2 delta)/2 at the first
    // step, and the second rotation leaves |0><0| populations alone.
    const double delta = 0.2;
    const NoiseProcess p(Dims{1, 2}, DensityOperator::all_zeros(Dims{1, 2}),
                         constant_steps(JointStep{hamiltonian_channel(pauli_z(), delta)}), basis_projector(2, 0));
    ComplexMatrix h(2, 2);
    h << 1.0, 1.0, 1.0, -1.0;
    h /= std::sqrt(2.0);
    EXPECT_NEAR(sequence_fidelity(p, {h}), (1.0 + std::cos(2.0 * delta)) / 2.0, 1e-14);
}

TEST(RunRb, NoiselessRunIsExact) {
    const NoiseProcess p = time_independent_process(KrausChannel::identity(4), kPair, "id");
    const ASFCurve c = run_rb(p, config({1, 5, 10}, 20, 3));
    for (const auto &pt : c.points()) {
        EXPECT_NEAR(pt.value, 1.0, 1e-12);
        ASSERT_TRUE(pt.std_error.has_value());
        EXPECT_LT(*pt.std_error, 1e-12);
    }
}

TEST(RunRb, IdentityPovmGivesOne) {
    const NoiseProcess base = two_spin_process();
    const NoiseProcess p(base.dims, base.rho0, base.steps, identity(2));
    const ASFCurve curve = run_rb(p, config({2, 7}, 10, 4));
    for (const auto &pt : curve.points()) {
        EXPECT_NEAR(pt.value, 1.0, 1e-12);
    }
}

TEST(RunRb, SeedDeterminesOutputBitwise) {
    const NoiseProcess p = two_spin_process();
    const ASFCurve a = run_rb(p, config({1, 4, 9}, 30, 11));
    const ASFCurve b = run_rb(p, config({1, 4, 9}, 30, 11));
    const ASFCurve c = run_rb(p, config({1, 4, 9}, 30, 12));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].value, b[i].value);
        EXPECT_EQ(*a[i].std_error, *b[i].std_error);
    }
    EXPECT_NE(a[2].value, c[2].value);
    EXPECT_EQ(a.meta().seed, 11u);
    EXPECT_EQ(a.meta().samples, 30u);
}

TEST(RunRb, ThreadCountDoesNotChangeOutput) {
    const NoiseProcess p = two_spin_process();
    RBRunConfig one = config({1, 3, 8, 20}, 40, 5);
    RBRunConfig many = one;
    many.threads = 3;
    const ASFCurve a = run_rb(p, one);
    const ASFCurve b = run_rb(p, many);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].value, b[i].value);
    }
}

TEST(RunRb, GridPointsAreSampledIndependently) {
    // The stream at (m, sample) does not depend on which other m are run.
    const NoiseProcess p = two_spin_process();
    const ASFCurve full = run_rb(p, config({1, 4, 9}, 25, 8));
    const ASFCurve single = run_rb(p, config({4}, 25, 8));
    EXPECT_EQ(full.at(4), single.at(4));
}

TEST(RunRb, MeanAgreesWithAnalyticalWithinThreeSigma) {
    const NoiseProcess p = two_spin_process();
    const ASFCurve c = run_rb(p, config({5}, 10000, 2026));
    const double se = *c[0].std_error;
    EXPECT_LE(std::abs(c[0].value - asf_analytical(p, 5)), 3.0 * se) << "se=" << se;
}

TEST(RunRb, HaarAndCliffordSourcesAgree) {
    // Both are unitary 2-designs, so both estimate the same average.
    const NoiseProcess p = two_spin_process();
    RBRunConfig cl = config({3, 12}, 4000, 77);
    RBRunConfig haar = cl;
    haar.gate_source = GateSource::Haar;
    const ASFCurve a = run_rb(p, cl);
    const ASFCurve b = run_rb(p, haar);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double exact = asf_analytical(p, a[i].m);
        EXPECT_LE(std::abs(a[i].value - exact), 4.0 * *a[i].std_error);
        EXPECT_LE(std::abs(b[i].value - exact), 4.0 * *b[i].std_error);
    }
}

TEST(RunRb, StandardErrorShrinksAsInverseRootSamples) {
    const NoiseProcess p = two_spin_process();
    const double se_small = *run_rb(p, config({15}, 400, 9))[0].std_error;
    const double se_large = *run_rb(p, config({15}, 1600, 9))[0].std_error;
    EXPECT_NEAR(se_small / se_large, 2.0, 0.4);
}

TEST(RunRb, InterleavedMarkovianDecayUsesComposedStep) {
    // Under system-only noise each random gate plus k identities acts as
    // L^(k+1), so successive differences of F_m shrink by the twirl of that
    // composition; for depolarizing L this is p^(k+1).
    SeededRng rng(64);
    const double q = 0.06;
    const KrausChannel depol({std::sqrt(1.0 - 0.75 * q) * identity(2), std::sqrt(q / 4.0) * pauli_x(),
                              std::sqrt(q / 4.0) * pauli_y(), std::sqrt(q / 4.0) * pauli_z()});
    const KrausChannel generic = random_cptp_channel(2, 2, rng);
    for (const KrausChannel *lam : {&depol, &generic}) {
        const NoiseProcess proc(kPair, DensityOperator::all_zeros(kPair), constant_steps(SystemOnlyStep{*lam}),
                                basis_projector(2, 0));
        for (std::size_t k : {0u, 1u, 3u}) {
            KrausChannel block = *lam;
            for (std::size_t i = 0; i < k; ++i) {
                block = compose(*lam, block);
            }
            const double expected = lam == &depol ? std::pow(1.0 - q, static_cast<double>(k + 1))
                                                  : noise_strength(block).p;
            const ASFCurve c = asf_curve(proc, {1, 2, 3, 4}, IdentityPattern::interleaved(k));
            for (std::size_t m = 1; m + 2 <= 4; ++m) {
                const double ratio = (c.at(m + 2) - c.at(m + 1)) / (c.at(m + 1) - c.at(m));
                EXPECT_NEAR(ratio, expected, 1e-9) << "k=" << k;
            }
            RBRunConfig cfg = config({1, 2, 3, 4}, 2000, 13);
            cfg.pattern = IdentityPattern::interleaved(k);
            const ASFCurve mc = run_rb(proc, cfg);
            for (std::size_t i = 0; i < mc.size(); ++i) {
                EXPECT_LE(std::abs(mc[i].value - c[i].value), 4.0 * *mc[i].std_error + 1e-12);
            }
        }
    }
}

TEST(RunRb, ValidatesConfig) {
    const NoiseProcess p = two_spin_process();
    EXPECT_THROW(run_rb(p, config({3, 2}, 10, 1)), std::invalid_argument);
    EXPECT_THROW(run_rb(p, config({0, 2}, 10, 1)), std::invalid_argument);
    EXPECT_THROW(run_rb(p, config({2}, 0, 1)), std::invalid_argument);
    RBRunConfig all_fixed = config({2}, 10, 1);
    all_fixed.pattern = IdentityPattern::prefix(2);
    EXPECT_THROW(run_rb(p, all_fixed), std::invalid_argument);
}

TEST(RandomPositions, MarksRandomSteps) {
    EXPECT_EQ(random_positions(IdentityPattern::interleaved(2), 2),
              (std::vector<bool>{true, false, false, true, false, false}));
    EXPECT_EQ(random_positions(IdentityPattern{{2, 9}, 0}, 3), (std::vector<bool>{true, false, true}));
}

TEST(Summarize, MeanAndStandardError) {
    const SampleStats s = summarize({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(*s.std_error, std::sqrt((5.0 / 3.0) / 4.0), 1e-15);
    EXPECT_FALSE(summarize({0.3}).std_error.has_value());
}

}  // namespace
}  // namespace nmrb
