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

#ifndef NMRB_FIT_HPP
#define NMRB_FIT_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nmrb/curve.hpp"

namespace nmrb {

/// Inclusive range of m values.
struct MWindow {
    std::size_t lo = 0;
    std::size_t hi = 0;
    bool operator==(const MWindow &) const = default;
};

/// A p^m + B fitted by least squares.
struct ExpFit {
    double a = 0.0;
    double p = 1.0;
    double b = 0.0;
    /// Unweighted residuals of the fitted curve on the fit window.
    double rms_residual = 0.0;
    double max_residual = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::string diagnostic;
    MWindow window;

    double operator()(double m) const { return a * std::pow(p, m) + b; }
};

inline constexpr std::size_t kFitMaxIterations = 200;
inline constexpr double kFitStepTolerance = 1e-12;

namespace detail {

struct FitData {
    std::vector<double> m;
    std::vector<double> y;
    std::vector<double> w;  // sqrt of weights
};

inline double weighted_cost(const FitData &d, double a, double p, double b) {
    double c = 0.0;
    for (std::size_t i = 0; i < d.m.size(); ++i) {
        const double r = d.w[i] * (a * std::pow(p, d.m[i]) + b - d.y[i]);
        c += r * r;
    }
    return c;
}

/// Ordinary least squares slope/intercept of (x, y).
inline std::pair<double, double> linear_regression(const std::vector<double> &x, const std::vector<double> &y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    const double slope = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    return {slope, (sy - slope * sx) / n};
}

/// Weighted least-squares (A, B) for fixed p.
inline std::pair<double, double> linear_coefficients(const FitData &d, double p) {
    double s00 = 0, s01 = 0, s11 = 0, t0 = 0, t1 = 0;
    for (std::size_t i = 0; i < d.m.size(); ++i) {
        const double w2 = d.w[i] * d.w[i];
        const double pm = std::pow(p, d.m[i]);
        s00 += w2 * pm * pm;
        s01 += w2 * pm;
        s11 += w2;
        t0 += w2 * pm * d.y[i];
        t1 += w2 * d.y[i];
    }
    const double det = s00 * s11 - s01 * s01;
    if (!(std::abs(det) > 1e-300)) {
        return {0.0, t1 / s11};
    }
    return {(t0 * s11 - s01 * t1) / det, (s00 * t1 - s01 * t0) / det};
}

inline double reduced_cost(const FitData &d, double p) {
    const auto [a, b] = linear_coefficients(d, p);
    return weighted_cost(d, a, p, b);
}

inline constexpr double kMaxRate = 1.0 - 1e-10;

/// Minimizer of the reduced cost over p in (0, 1): a grid in -log10(1 - p)
/// (plus the starting guess) brackets it, golden-section search refines it.
inline double best_rate(const FitData &d, double p_start) {
    auto rate = [](double s) { return std::min(1.0 - std::pow(10.0, -s), kMaxRate); };
    constexpr int kGrid = 400;
    constexpr double kSMax = 10.0;
    std::vector<double> ps;
    for (int i = 1; i <= kGrid; ++i) {
        ps.push_back(rate(kSMax * i / kGrid));
    }
    if (p_start > 0.0 && p_start < kMaxRate) {
        ps.push_back(p_start);
    }
    std::sort(ps.begin(), ps.end());
    std::size_t best = 0;
    double best_cost = INFINITY;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double c = reduced_cost(d, ps[i]);
        if (c < best_cost) {
            best_cost = c;
            best = i;
        }
    }
    double lo = best == 0 ? ps[0] * 0.5 : ps[best - 1];
    double hi = best + 1 < ps.size() ? ps[best + 1] : kMaxRate;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = reduced_cost(d, x1), f2 = reduced_cost(d, x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = reduced_cost(d, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = reduced_cost(d, x2);
        }
    }
    const double p = 0.5 * (lo + hi);
    return reduced_cost(d, p) <= best_cost ? p : ps[best];
}

}  // namespace detail

/// Fit A p^m + B over the window (all points when absent). Starts from B0
/// just beyond the data range and a log-linear fit for p0, locates the rate
/// on the reduced cost, then refines (A, p, B) jointly with damped
/// Gauss-Newton (Levenberg-Marquardt). Points are weighted by 1/stderr^2 when every
/// point in the window carries a positive stderr.
inline ExpFit fit_exponential(const ASFCurve &curve, std::optional<MWindow> window = std::nullopt) {
    ExpFit fit;
    detail::FitData d;
    bool weighted = true;
    for (const auto &pt : curve.points()) {
        if (window && (pt.m < window->lo || pt.m > window->hi)) {
            continue;
        }
        d.m.push_back(static_cast<double>(pt.m));
        d.y.push_back(pt.value);
        weighted = weighted && pt.std_error && *pt.std_error > 0.0;
    }
    for (const auto &pt : curve.points()) {
        if (window && (pt.m < window->lo || pt.m > window->hi)) {
            continue;
        }
        d.w.push_back(weighted ? 1.0 / *pt.std_error : 1.0);
    }
    if (d.m.size() < 4) {
        throw std::invalid_argument("fit_exponential: need at least 4 points in the window, have " +
                                    std::to_string(d.m.size()));
    }
    fit.window = {static_cast<std::size_t>(d.m.front()), static_cast<std::size_t>(d.m.back())};

    auto finish = [&](ExpFit &f) {
        double ss = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < d.m.size(); ++i) {
            const double r = f(d.m[i]) - d.y[i];
            ss += r * r;
            mx = std::max(mx, std::abs(r));
        }
        f.rms_residual = std::sqrt(ss / static_cast<double>(d.m.size()));
        f.max_residual = mx;
        return f;
    };

    const auto [ymin_it, ymax_it] = std::minmax_element(d.y.begin(), d.y.end());
    const double ymin = *ymin_it;
    const double ymax = *ymax_it;
    const double span = ymax - ymin;
    if (span <= 1e-14 * std::max(1.0, std::abs(ymax))) {
        fit.a = 0.0;
        fit.p = 1.0;
        fit.b = d.y.front();
        fit.converged = false;
        fit.diagnostic = "constant data: decay rate is not identifiable";
        return finish(fit);
    }

    // Decaying data sits above its asymptote; rising data below it.
    const double sign = d.y.front() >= d.y.back() ? 1.0 : -1.0;
    const double margin = 1e-3 * span + 1e-12;
    const double b0 = sign > 0 ? ymin - margin : ymax + margin;
    std::vector<double> ly;
    for (double y : d.y) {
        ly.push_back(std::log(sign * (y - b0)));
    }
    const auto [slope, intercept] = detail::linear_regression(d.m, ly);
    const double p0 = std::exp(slope);

    // A and B enter linearly, so for each p they have a closed form; the rate
    // is located on the reduced one-dimensional cost before the joint
    // refinement. This keeps the search stable when p is close to 1, where
    // A and B are nearly collinear.
    double p = detail::best_rate(d, p0);
    auto [a, b] = detail::linear_coefficients(d, p);

    double lambda = 1e-3;
    double cost = detail::weighted_cost(d, a, p, b);
    const std::size_t n = d.m.size();
    for (fit.iterations = 1; fit.iterations <= kFitMaxIterations; ++fit.iterations) {
        Eigen::MatrixXd j(n, 3);
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double pm = std::pow(p, d.m[i]);
            const double dpm = d.m[i] == 0.0 ? 0.0 : d.m[i] * std::pow(p, d.m[i] - 1.0);
            j(static_cast<Eigen::Index>(i), 0) = d.w[i] * pm;
            j(static_cast<Eigen::Index>(i), 1) = d.w[i] * a * dpm;
            j(static_cast<Eigen::Index>(i), 2) = d.w[i];
            r(static_cast<Eigen::Index>(i)) = d.w[i] * (a * pm + b - d.y[i]);
        }
        const Eigen::Matrix3d jtj = j.transpose() * j;
        const Eigen::Vector3d g = j.transpose() * r;
        bool accepted = false;
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        while (lambda < 1e20) {
            Eigen::Matrix3d lhs = jtj;
            for (int k = 0; k < 3; ++k) {
                lhs(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            }
            step = lhs.ldlt().solve(-g);
            const double na = a + step(0), np = p + step(1), nb = b + step(2);
            const double nc = (np > 0.0) ? detail::weighted_cost(d, na, np, nb) : INFINITY;
            if (std::isfinite(nc) && nc <= cost) {
                a = na;
                p = np;
                b = nb;
                cost = nc;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
            if (step.norm() < kFitStepTolerance) {
                break;
            }
        }
        // A rejected step at huge damping means no descent direction is left.
        if (step.norm() < kFitStepTolerance || !accepted) {
            fit.converged = true;
            break;
        }
    }
    if (p >= detail::kMaxRate * (1.0 - 1e-12)) {
        fit.converged = false;
        fit.diagnostic = "decay rate at the upper search bound; data show no resolvable decay";
    }
    fit.iterations = std::min(fit.iterations, kFitMaxIterations);
    fit.a = a;
    fit.p = p;
    fit.b = b;
    if (!fit.converged && fit.diagnostic.empty()) {
        fit.diagnostic = "iteration limit reached before the step norm fell below tolerance";
    }
    return finish(fit);
}

}  // namespace nmrb

#endif  // NMRB_FIT_HPP
