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

#ifndef NMRB_CLASSICAL_HPP
#define NMRB_CLASSICAL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nmrb/curve.hpp"
#include "nmrb/linalg.hpp"

namespace nmrb {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix with the
/// given off-diagonal, weights are mu0 * (first eigenvector component)^2.
inline QuadratureRule golub_welsch(const std::vector<double> &off_diag, double mu0) {
    const auto n = static_cast<Eigen::Index>(off_diag.size() + 1);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        j(k, k + 1) = off_diag[static_cast<std::size_t>(k)];
        j(k + 1, k) = off_diag[static_cast<std::size_t>(k)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
    QuadratureRule rule;
    for (Eigen::Index i = 0; i < n; ++i) {
        rule.nodes.push_back(eig.eigenvalues()(i));
        const double v0 = eig.eigenvectors()(0, i);
        rule.weights.push_back(mu0 * v0 * v0);
    }
    return rule;
}

/// Gauss-Hermite rule for weight e^(-x^2).
inline QuadratureRule gauss_hermite(std::size_t n) {
    std::vector<double> off;
    for (std::size_t k = 1; k < n; ++k) {
        off.push_back(std::sqrt(static_cast<double>(k) / 2.0));
    }
    return golub_welsch(off, std::sqrt(std::numbers::pi));
}

/// Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(std::size_t n) {
    std::vector<double> off;
    for (std::size_t k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        off.push_back(kk / std::sqrt(4.0 * kk * kk - 1.0));
    }
    return golub_welsch(off, 2.0);
}

/// Survival factor of a qubit under phase kick delta: (4 cos^2 delta - 1)/3.
inline double dephasing_factor(double delta) {
    const double c = std::cos(delta);
    return (4.0 * c * c - 1.0) / 3.0;
}

/// E[f(delta)] for delta ~ N(0, sigma^2) by n-node Gauss-Hermite.
template <class F>
double gaussian_expectation(F &&f, double sigma, const QuadratureRule &rule) {
    double acc = 0.0;
    const double scale = std::sqrt(2.0) * sigma;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        acc += rule.weights[i] * f(scale * rule.nodes[i]);
    }
    return acc / std::sqrt(std::numbers::pi);
}

enum class DephasingMode { Markovian, DC };

inline constexpr std::size_t kMinHermiteNodes = 64;

/// Gaussian-averaged dephasing RB curve for m = 1..m_max.
/// Markovian: the kick is redrawn every step, F_m = (E p)^m.
/// DC: one kick for the whole sequence, F_m = E[p^m].
/// Each expectation is accepted only if doubling the node count moves it by
/// at most the quadrature tolerance.
inline ASFCurve classical_dephasing_asf(double sigma, std::size_t m_max, DephasingMode mode,
                                        std::size_t nodes = kMinHermiteNodes) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("classical_dephasing_asf: sigma must be > 0");
    }
    nodes = std::max(nodes, kMinHermiteNodes);
    const QuadratureRule coarse = gauss_hermite(nodes);
    const QuadratureRule fine = gauss_hermite(2 * nodes);
    auto checked = [&](auto &&f) {
        const double a = gaussian_expectation(f, sigma, coarse);
        const double b = gaussian_expectation(f, sigma, fine);
        if (std::abs(a - b) > kTolerances.quadrature) {
            throw NumericError("classical_dephasing_asf: quadrature not converged (|I_n - I_2n| = " +
                               std::to_string(std::abs(a - b)) + ")");
        }
        return b;
    };
    CurveMeta meta;
    meta.model_id = mode == DephasingMode::Markovian ? "classical_dephasing:markovian" : "classical_dephasing:dc";
    meta.engine = Engine::Quadrature;
    ASFCurve curve(meta);
    if (mode == DephasingMode::Markovian) {
        const double p = checked([](double d) { return dephasing_factor(d); });
        double acc = 1.0;
        for (std::size_t m = 1; m <= m_max; ++m) {
            acc *= p;
            curve.push_back(m, acc);
        }
    } else {
        for (std::size_t m = 1; m <= m_max; ++m) {
            const double mm = static_cast<double>(m);
            curve.push_back(m, checked([mm](double d) { return std::pow(dephasing_factor(d), mm); }));
        }
    }
    return curve;
}

/// Gaussian average of the single-step dephasing factor.
inline double classical_dephasing_rate(double sigma) {
    return classical_dephasing_asf(sigma, 1, DephasingMode::Markovian)[0].value;
}

struct ShallowPocketResult {
    double value = 0.0;
    /// Distinct frequencies summed.
    std::size_t terms = 0;
    /// False when some factor p_tau(x) can go negative within the central 99%
    /// of the Cauchy mass.
    bool factors_in_range = true;
};

inline constexpr std::size_t kShallowPocketMaxTerms = 1'000'000;

/// Cauchy-averaged (location 0, scale gamma) product of dephasing factors
/// p_tau(x) = (1 + 2 cos 2 tau x)/3.
///
/// Each factor is a three-term trigonometric sum, so the product is a finite
/// sum of e^(i w x) with w in {2 sum c_n tau_n : c_n in {-1, 0, 1}}, and the
/// Cauchy characteristic function E[e^(i w x)] = e^(-gamma |w|) makes the
/// average exact. Equal frequencies are merged as they are generated.
inline ShallowPocketResult shallow_pocket_evaluate(double gamma, const std::vector<double> &taus) {
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("shallow_pocket_asf: gamma must be > 0");
    }
    std::vector<std::pair<double, double>> spectrum{{0.0, 1.0}};  // (|w|, weight)
    double tau_max = 0.0;
    for (double tau : taus) {
        tau_max = std::max(tau_max, std::abs(tau));
        std::vector<std::pair<double, double>> next;
        next.reserve(spectrum.size() * 3);
        for (const auto &[w, c] : spectrum) {
            for (int s : {-1, 0, 1}) {
                next.emplace_back(std::abs(w + 2.0 * s * tau), c / 3.0);
            }
        }
        std::sort(next.begin(), next.end());
        spectrum.clear();
        for (const auto &[w, c] : next) {
            if (!spectrum.empty() && std::abs(spectrum.back().first - w) <= 1e-13 * std::max(1.0, w)) {
                spectrum.back().second += c;
            } else {
                spectrum.emplace_back(w, c);
            }
        }
        if (spectrum.size() > kShallowPocketMaxTerms) {
            throw NumericError("shallow_pocket_asf: frequency expansion exceeds term budget");
        }
    }
    // Sum small contributions first.
    std::vector<double> contrib;
    contrib.reserve(spectrum.size());
    for (const auto &[w, c] : spectrum) {
        contrib.push_back(c * std::exp(-gamma * w));
    }
    std::sort(contrib.begin(), contrib.end());
    double acc = 0.0;
    for (double v : contrib) {
        acc += v;
    }
    // cos(2 tau x) reaches -1/2 once 2 tau |x| >= 2 pi / 3.
    const double x99 = gamma * std::tan(0.99 * std::numbers::pi / 2.0);
    const bool in_range = 2.0 * tau_max * x99 < 2.0 * std::numbers::pi / 3.0;
    return {acc, spectrum.size(), in_range};
}

inline double shallow_pocket_asf(double gamma, const std::vector<double> &taus, std::size_t m) {
    if (taus.size() < m) {
        throw std::invalid_argument("shallow_pocket_asf: need one tau per step");
    }
    return shallow_pocket_evaluate(gamma, std::vector<double>(taus.begin(), taus.begin() + static_cast<long>(m)))
        .value;
}

/// Direct quadrature of the same average: x = gamma tan(theta) maps the
/// Cauchy density to the uniform density on (-pi/2, pi/2). The integrand
/// oscillates without bound near the endpoints, so this converges slowly and
/// serves only as an independent cross-check.
inline double shallow_pocket_quadrature(double gamma, const std::vector<double> &taus, std::size_t nodes = 256) {
    const QuadratureRule rule = gauss_legendre(nodes);
    const double half = std::numbers::pi / 2.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x = gamma * std::tan(half * rule.nodes[i]);
        double prod = 1.0;
        for (double tau : taus) {
            prod *= dephasing_factor(tau * x);
        }
        acc += rule.weights[i] * prod;
    }
    return acc * half / std::numbers::pi;
}

}  // namespace nmrb

#endif  // NMRB_CLASSICAL_HPP
