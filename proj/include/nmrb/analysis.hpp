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

#ifndef NMRB_ANALYSIS_HPP
#define NMRB_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmrb/curve.hpp"
#include "nmrb/fit.hpp"

namespace nmrb {

inline constexpr double kInfinityNorm = std::numeric_limits<double>::infinity();

/// l_q distance between two curves on the same m grid (q = infinity allowed).
inline double rb_nonmarkovianity(const ASFCurve &curve, const ASFCurve &reference, double q) {
    if (curve.m_values() != reference.m_values()) {
        throw std::invalid_argument("rb_nonmarkovianity: curves must share the same m grid");
    }
    if (!(q >= 1.0)) {
        throw std::invalid_argument("rb_nonmarkovianity: q must be >= 1");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double d = std::abs(curve[i].value - reference[i].value);
        acc = std::isinf(q) ? std::max(acc, d) : acc + std::pow(d, q);
    }
    return std::isinf(q) ? acc : std::pow(acc, 1.0 / q);
}

struct ScanCandidate {
    /// Steps 1..k fixed to the identity (k = 0 is the unmodified curve).
    std::size_t k = 0;
    double p = 0.0;
    MWindow window;
    bool fit_converged = false;
};

struct MemoryScanReport {
    std::size_t ell_hat = 0;
    std::size_t matched_k = 0;
    double p_reference = 0.0;
    double p_matched = 0.0;
    double tolerance_used = 0.0;
    MWindow reference_window;
    ExpFit reference_fit;
    std::vector<ScanCandidate> candidates;
    /// False when no candidate met the tolerance; the closest is reported.
    bool converged = false;
};

/// Coefficient of determination of a straight-line fit.
inline double r_squared(const std::vector<double> &x, const std::vector<double> &y) {
    const auto [slope, intercept] = detail::linear_regression(x, y);
    double mean = 0.0;
    for (double v : y) {
        mean += v;
    }
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (slope * x[i] + intercept);
        ss_res += r * r;
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    return ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

/// Longest suffix of the curve on which log(F_m - B) is linear with
/// R^2 >= min_r2, B taken from a fit to the second half of the curve.
inline MWindow auto_reference_window(const ASFCurve &curve, double min_r2 = 0.999) {
    if (curve.size() < 8) {
        throw std::invalid_argument("auto_reference_window: need at least 8 points");
    }
    const std::size_t half = curve.size() / 2;
    const ExpFit tail = fit_exponential(curve, MWindow{curve[half].m, curve[curve.size() - 1].m});
    const double sign = tail.a >= 0.0 ? 1.0 : -1.0;
    for (std::size_t start = 0; start + 4 <= curve.size(); ++start) {
        std::vector<double> x, y;
        bool ok = true;
        for (std::size_t i = start; i < curve.size(); ++i) {
            const double v = sign * (curve[i].value - tail.b);
            if (!(v > 0.0)) {
                ok = false;
                break;
            }
            x.push_back(static_cast<double>(curve[i].m));
            y.push_back(std::log(v));
        }
        if (ok && r_squared(x, y) >= min_r2) {
            return {curve[start].m, curve[curve.size() - 1].m};
        }
    }
    return {curve[curve.size() - 4].m, curve[curve.size() - 1].m};
}

/// Memory-length scan. curves[k] has steps 1..k fixed to the identity
/// (curves[0] unmodified). The reference rate comes from the unmodified curve
/// on the reference window; candidate k is fit on [k + 1, window.hi] (the
/// unmodified curve on [first m, window.hi]). Returns the smallest k with
/// |p_k - p_ref| <= rel_tol p_ref and ell_hat = k + 1.
inline MemoryScanReport memory_length_scan(const std::vector<ASFCurve> &curves,
                                           std::optional<MWindow> reference_window, double rel_tol = 0.01) {
    if (curves.size() < 2) {
        throw std::invalid_argument("memory_length_scan: need the unmodified curve and at least one pattern");
    }
    MemoryScanReport rep;
    rep.tolerance_used = rel_tol;
    rep.reference_window = reference_window ? *reference_window : auto_reference_window(curves[0]);
    rep.reference_fit = fit_exponential(curves[0], rep.reference_window);
    rep.p_reference = rep.reference_fit.p;
    const std::size_t hi = rep.reference_window.hi;
    double best_gap = kInfinityNorm;
    bool matched = false;
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const MWindow w{k == 0 ? curves[0][0].m : k + 1, hi};
        const ExpFit f = fit_exponential(curves[k], w);
        rep.candidates.push_back({k, f.p, w, f.converged});
        const double gap = std::abs(f.p - rep.p_reference);
        if (!matched && gap <= rel_tol * rep.p_reference) {
            matched = true;
            rep.matched_k = k;
            rep.p_matched = f.p;
        }
        if (!matched && gap < best_gap) {
            best_gap = gap;
            rep.matched_k = k;
            rep.p_matched = f.p;
        }
    }
    rep.converged = matched;
    rep.ell_hat = rep.matched_k + 1;
    return rep;
}

enum class BaselineConstraint { AEqualsB, APlusBEqualsOne, Custom };

inline const char *to_string(BaselineConstraint c) {
    switch (c) {
        case BaselineConstraint::AEqualsB:
            return "A_eq_B";
        case BaselineConstraint::APlusBEqualsOne:
            return "A_plus_B_eq_1";
        case BaselineConstraint::Custom:
            return "custom";
    }
    return "custom";
}

/// Exponential reference curve from a fitted rate with constrained constants:
/// AEqualsB keeps the fitted asymptote B and sets A = 1 - B; APlusBEqualsOne
/// keeps the fitted A and sets B = 1 - A; Custom uses (a, b) as given.
inline ASFCurve markovianized_baseline(const ExpFit &fit, BaselineConstraint constraint,
                                       const std::vector<std::size_t> &ms, double a = 1.0, double b = 0.0) {
    if (!std::isfinite(fit.p)) {
        throw std::invalid_argument("markovianized_baseline: fitted p is not finite");
    }
    double ca = a, cb = b;
    if (constraint == BaselineConstraint::AEqualsB) {
        cb = fit.b;
        ca = 1.0 - fit.b;
    } else if (constraint == BaselineConstraint::APlusBEqualsOne) {
        ca = fit.a;
        cb = 1.0 - fit.a;
    }
    CurveMeta meta;
    meta.model_id = "baseline";
    meta.engine = Engine::Markovianized;
    meta.note = std::string(to_string(constraint)) + " A=" + std::to_string(ca) + " B=" + std::to_string(cb) +
                " p=" + std::to_string(fit.p);
    ASFCurve out(meta);
    for (auto m : ms) {
        out.push_back(m, ca * std::pow(fit.p, static_cast<double>(m)) + cb);
    }
    return out;
}

enum class CoherenceVerdict { Coherent, Dissipative, Inconclusive };

inline const char *to_string(CoherenceVerdict v) {
    switch (v) {
        case CoherenceVerdict::Coherent:
            return "Coherent";
        case CoherenceVerdict::Dissipative:
            return "Dissipative";
        case CoherenceVerdict::Inconclusive:
            return "Inconclusive";
    }
    return "Inconclusive";
}

struct CoherenceReport {
    CoherenceVerdict verdict = CoherenceVerdict::Inconclusive;
    double threshold = 0.0;
    /// Per curve, in input order: deviation of the curve from its best
    /// exponential beyond statistical noise (zeroed when below threshold).
    std::vector<double> statistics;
    std::vector<ExpFit> fits;
};

inline constexpr double kNoiseSigmas = 4.0;
inline constexpr double kThresholdFloor = 1e-6;

/// max over m of (|F_m - fit(m)| - 4 stderr_m)^+; the plain max residual for
/// curves without stderr.
inline double non_exponential_excess(const ASFCurve &curve, const ExpFit &fit) {
    double out = 0.0;
    for (const auto &pt : curve.points()) {
        if (pt.m < fit.window.lo || pt.m > fit.window.hi) {
            continue;
        }
        const double r = std::abs(pt.value - fit(static_cast<double>(pt.m)));
        const double noise = pt.std_error ? kNoiseSigmas * *pt.std_error : 0.0;
        out = std::max(out, std::max(0.0, r - noise));
    }
    return out;
}

/// Default threshold: 5x the fit residual of the exponential baseline built
/// from the first curve's fit, floored at 1e-6.
inline double default_coherence_threshold(const ASFCurve &base) {
    const ExpFit f = fit_exponential(base);
    const ASFCurve baseline = markovianized_baseline(f, BaselineConstraint::Custom, base.m_values(), f.a, f.b);
    return std::max(5.0 * fit_exponential(baseline).max_residual, kThresholdFloor);
}

/// Curves ordered by increasing interleaving depth, the first being the
/// baseline protocol. Coherent when every curve deviates from an exponential
/// beyond the threshold; Dissipative when, over at least three depths, the
/// deviation never grows and ends below the threshold.
inline CoherenceReport coherence_diagnosis(const std::vector<ASFCurve> &scan,
                                           std::optional<double> residual_threshold = std::nullopt) {
    CoherenceReport rep;
    if (scan.size() < 2) {
        return rep;
    }
    rep.threshold = residual_threshold ? *residual_threshold : default_coherence_threshold(scan.front());
    for (const auto &c : scan) {
        const ExpFit f = fit_exponential(c);
        double s = non_exponential_excess(c, f);
        if (s < rep.threshold) {
            s = 0.0;
        }
        rep.fits.push_back(f);
        rep.statistics.push_back(s);
    }
    const auto &st = rep.statistics;
    if (std::all_of(st.begin(), st.end(), [](double s) { return s > 0.0; })) {
        rep.verdict = CoherenceVerdict::Coherent;
    } else if (st.size() >= 3 && std::is_sorted(st.rbegin(), st.rend()) && st.back() == 0.0) {
        rep.verdict = CoherenceVerdict::Dissipative;
    }
    return rep;
}

}  // namespace nmrb

#endif  // NMRB_ANALYSIS_HPP
