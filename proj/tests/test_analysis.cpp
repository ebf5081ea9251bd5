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

#include "nmrb/analysis.hpp"
#include "nmrb/random.hpp"

namespace nmrb {
namespace {

ASFCurve from_values(const std::vector<double> &v, std::size_t first_m = 1) {
    ASFCurve c;
    for (std::size_t i = 0; i < v.size(); ++i) {
        c.push_back(first_m + i, v[i]);
    }
    return c;
}

/// F_m = 0.5 prod_{n = k+1}^{m} p_n + 0.5: Markovian noise with steps 1..k
/// noiseless, p_n = early for n <= memory and late afterwards.
ASFCurve prefix_curve(std::size_t k, std::size_t memory, double early, double late, std::size_t m_max) {
    ASFCurve c;
    double prod = 1.0;
    for (std::size_t m = 1; m <= m_max; ++m) {
        if (m > k) {
            prod *= m <= memory ? early : late;
        }
        if (m > k) {
            c.push_back(m, 0.5 * prod + 0.5);
        }
    }
    return c;
}

TEST(RbNonMarkovianity, IdenticalCurvesGiveZero) {
    const ASFCurve c = from_values({0.9, 0.8, 0.7});
    for (double q : {1.0, 2.0, kInfinityNorm}) {
        EXPECT_EQ(rb_nonmarkovianity(c, c, q), 0.0);
    }
}

TEST(RbNonMarkovianity, SingletonGridIsAbsoluteDifference) {
    const ASFCurve a = from_values({0.9});
    const ASFCurve b = from_values({0.75});
    for (double q : {1.0, 2.0, 3.5, kInfinityNorm}) {
        EXPECT_NEAR(rb_nonmarkovianity(a, b, q), 0.15, 1e-15);
    }
}

TEST(RbNonMarkovianity, NormValues) {
    const ASFCurve a = from_values({1.0, 1.0, 1.0});
    const ASFCurve b = from_values({0.7, 1.4, 1.0});
    EXPECT_NEAR(rb_nonmarkovianity(a, b, 1.0), 0.7, 1e-15);
    EXPECT_NEAR(rb_nonmarkovianity(a, b, 2.0), 0.5, 1e-15);
    EXPECT_NEAR(rb_nonmarkovianity(a, b, kInfinityNorm), 0.4, 1e-15);
}

TEST(RbNonMarkovianity, NormPropertiesOnRandomCurves) {
    SeededRng rng(81);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x, y, z;
        for (int i = 0; i < 12; ++i) {
            x.push_back(rng.uniform01());
            y.push_back(rng.uniform01());
            z.push_back(rng.uniform01());
        }
        const ASFCurve a = from_values(x), b = from_values(y), c = from_values(z);
        double prev = kInfinityNorm;
        for (double q : {1.0, 1.5, 2.0, 4.0, kInfinityNorm}) {
            const double ab = rb_nonmarkovianity(a, b, q);
            EXPECT_NEAR(ab, rb_nonmarkovianity(b, a, q), 1e-15);
            EXPECT_LE(ab, rb_nonmarkovianity(a, c, q) + rb_nonmarkovianity(c, b, q) + 1e-12);
            EXPECT_LE(ab, prev + 1e-12);  // l_q norms do not grow with q
            prev = ab;
        }
    }
}

TEST(RbNonMarkovianity, RejectsMismatchedGridsAndBadQ) {
    EXPECT_THROW(rb_nonmarkovianity(from_values({0.9, 0.8}), from_values({0.9, 0.8}, 2), 1.0),
                 std::invalid_argument);
    EXPECT_THROW(rb_nonmarkovianity(from_values({0.9}), from_values({0.9}), 0.5), std::invalid_argument);
}

TEST(MemoryLengthScan, FindsFirstPrefixThatRemovesMemory) {
    // Four fast-decaying steps. Candidate k is fit from m = k + 1, whose
    // window still holds one fast step; a single step only rescales A, so
    // k = 3 is the first exponential candidate.
    std::vector<ASFCurve> curves;
    for (std::size_t k = 0; k <= 5; ++k) {
        curves.push_back(prefix_curve(k, 4, 0.5, 0.95, 40));
    }
    const MemoryScanReport r = memory_length_scan(curves, MWindow{15, 40});
    EXPECT_NEAR(r.p_reference, 0.95, 1e-8);
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.matched_k, 3u);
    EXPECT_EQ(r.ell_hat, 4u);
    EXPECT_NEAR(r.p_matched, 0.95, 1e-8);
    ASSERT_EQ(r.candidates.size(), 6u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_GT(std::abs(r.candidates[k].p - 0.95), 0.01 * 0.95) << "k=" << k;
    }
    EXPECT_EQ(r.candidates[3].window.lo, 4u);
    EXPECT_EQ(r.candidates[3].window.hi, 40u);
}

TEST(MemoryLengthScan, MarkovianCurveMatchesImmediately) {
    std::vector<ASFCurve> curves;
    for (std::size_t k = 0; k <= 4; ++k) {
        curves.push_back(prefix_curve(k, 0, 0.5, 0.95, 40));
    }
    const MemoryScanReport r = memory_length_scan(curves, MWindow{15, 40});
    EXPECT_EQ(r.ell_hat, 1u);
    EXPECT_EQ(r.matched_k, 0u);
}

TEST(MemoryLengthScan, IgnoresPointsBeyondReferenceWindow) {
    std::vector<ASFCurve> short_curves, long_curves;
    for (std::size_t k = 0; k <= 5; ++k) {
        short_curves.push_back(prefix_curve(k, 3, 0.5, 0.95, 40));
        ASFCurve longer = prefix_curve(k, 3, 0.5, 0.95, 40);
        for (std::size_t m = 41; m <= 60; ++m) {
            longer.push_back(m, 0.1);  // not exponential at all
        }
        long_curves.push_back(longer);
    }
    const MemoryScanReport a = memory_length_scan(short_curves, MWindow{15, 40});
    const MemoryScanReport b = memory_length_scan(long_curves, MWindow{15, 40});
    EXPECT_EQ(a.ell_hat, b.ell_hat);
    for (std::size_t k = 0; k < a.candidates.size(); ++k) {
        EXPECT_DOUBLE_EQ(a.candidates[k].p, b.candidates[k].p);
    }
}

TEST(MemoryLengthScan, ReportsClosestWhenNothingMatches) {
    std::vector<ASFCurve> curves;
    for (std::size_t k = 0; k <= 2; ++k) {
        curves.push_back(prefix_curve(k, 10, 0.7, 0.95, 40));
    }
    const MemoryScanReport r = memory_length_scan(curves, MWindow{15, 40});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.ell_hat, r.matched_k + 1);
    EXPECT_THROW(memory_length_scan({curves[0]}, MWindow{15, 40}), std::invalid_argument);
}

TEST(AutoReferenceWindow, PureExponentialUsesWholeCurve) {
    const ASFCurve c = prefix_curve(0, 0, 0.5, 0.95, 30);
    const MWindow w = auto_reference_window(c);
    EXPECT_EQ(w.lo, 1u);
    EXPECT_EQ(w.hi, 30u);
    const MWindow late = auto_reference_window(prefix_curve(0, 4, 0.5, 0.95, 30));
    EXPECT_GT(late.lo, 1u);
}

TEST(MarkovianizedBaseline, AppliesConstraints) {
    ExpFit f;
    f.a = 0.6;
    f.p = 0.9;
    f.b = 0.3;
    const std::vector<std::size_t> ms{1, 2, 1000};
    const ASFCurve eq = markovianized_baseline(f, BaselineConstraint::AEqualsB, ms);
    EXPECT_NEAR(eq.at(1), 0.7 * 0.9 + 0.3, 1e-15);
    EXPECT_NEAR(eq.at(1000), 0.3, 1e-12);
    const ASFCurve sum = markovianized_baseline(f, BaselineConstraint::APlusBEqualsOne, ms);
    EXPECT_NEAR(sum.at(2), 0.6 * 0.81 + 0.4, 1e-15);
    EXPECT_NEAR(sum.at(1000), 0.4, 1e-12);
    const ASFCurve custom = markovianized_baseline(f, BaselineConstraint::Custom, ms, 1.0, 0.0);
    EXPECT_NEAR(custom.at(2), 0.81, 1e-15);
    EXPECT_NE(custom.meta().note.find("custom"), std::string::npos);
    f.p = std::nan("");
    EXPECT_THROW(markovianized_baseline(f, BaselineConstraint::Custom, ms), std::invalid_argument);
}

TEST(NonExponentialExcess, SubtractsFourSigma) {
    ASFCurve c;
    ExpFit f;
    f.a = 0.5;
    f.p = 0.9;
    f.b = 0.5;
    f.window = {1, 5};
    for (std::size_t m = 1; m <= 5; ++m) {
        c.push_back(m, f(static_cast<double>(m)) + (m == 3 ? 0.05 : 0.0), 0.01);
    }
    EXPECT_NEAR(non_exponential_excess(c, f), 0.01, 1e-12);
}

TEST(CoherenceDiagnosis, SingleCurveIsInconclusive) {
    const CoherenceReport r = coherence_diagnosis({prefix_curve(0, 0, 0.5, 0.95, 30)});
    EXPECT_EQ(r.verdict, CoherenceVerdict::Inconclusive);
    EXPECT_TRUE(r.statistics.empty());
}

TEST(CoherenceDiagnosis, ExponentialCurvesAreDissipative) {
    std::vector<ASFCurve> scan;
    for (double p : {0.95, 0.9025, 0.857375}) {
        scan.push_back(prefix_curve(0, 0, 0.5, p, 30));
    }
    const CoherenceReport r = coherence_diagnosis(scan);
    EXPECT_EQ(r.verdict, CoherenceVerdict::Dissipative);
    EXPECT_GE(r.threshold, kThresholdFloor);
    for (double s : r.statistics) {
        EXPECT_EQ(s, 0.0);
    }
}

TEST(CoherenceDiagnosis, OscillatingCurvesAreCoherent) {
    std::vector<ASFCurve> scan;
    for (std::size_t depth = 0; depth < 4; ++depth) {
        ASFCurve c;
        for (std::size_t m = 1; m <= 40; ++m) {
            const double x = static_cast<double>(m);
            c.push_back(m, 0.5 * std::pow(0.95, x) + 0.5 + 0.02 * std::cos(0.4 * x * (1.0 + depth)));
        }
        scan.push_back(c);
    }
    const CoherenceReport r = coherence_diagnosis(scan);
    EXPECT_EQ(r.verdict, CoherenceVerdict::Coherent);
    for (double s : r.statistics) {
        EXPECT_GT(s, r.threshold);
    }
}

TEST(CoherenceDiagnosis, NonMonotoneMixIsInconclusive) {
    const ASFCurve flat = prefix_curve(0, 0, 0.5, 0.95, 30);
    ASFCurve wiggly;
    for (std::size_t m = 1; m <= 30; ++m) {
        wiggly.push_back(m, flat.at(m) + 0.03 * std::cos(1.3 * static_cast<double>(m)));
    }
    const CoherenceReport r = coherence_diagnosis({flat, wiggly, flat}, 1e-3);
    EXPECT_DOUBLE_EQ(r.threshold, 1e-3);
    EXPECT_EQ(r.statistics[0], 0.0);
    EXPECT_GT(r.statistics[1], 0.0);
    EXPECT_EQ(r.verdict, CoherenceVerdict::Inconclusive);
}

}  // namespace
}  // namespace nmrb
