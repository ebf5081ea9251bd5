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

#ifndef NMRB_JSON_IO_HPP
#define NMRB_JSON_IO_HPP

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmrb/analysis.hpp"
#include "nmrb/channel.hpp"
#include "nmrb/curve.hpp"
#include "nmrb/fit.hpp"
#include "nmrb/linalg.hpp"

namespace nmrb {

using Json = nlohmann::ordered_json;

/// Row-major [[ [re, im], ... ], ...]. A bare number is accepted for a real
/// entry on input.
inline Json matrix_to_json(const ComplexMatrix &m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ComplexMatrix matrix_from_json(const Json &j, const std::string &path) {
    if (!j.is_array() || j.empty()) {
        throw std::invalid_argument(path + ": expected a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = j.front().is_array() ? static_cast<Eigen::Index>(j.front().size()) : 0;
    ComplexMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json &row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols || cols == 0) {
            throw std::invalid_argument(path + "[" + std::to_string(i) + "]: rows must be arrays of equal length");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            const Json &e = row[static_cast<std::size_t>(k)];
            const std::string where = path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]";
            if (e.is_number()) {
                m(i, k) = Complex(e.get<double>(), 0.0);
            } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
                m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
            } else {
                throw std::invalid_argument(where + ": expected a number or [re, im]");
            }
        }
    }
    require_finite(m, path.c_str());
    return m;
}

inline Json channel_to_json(const KrausChannel &ch) {
    Json kraus = Json::array();
    for (const auto &k : ch.kraus()) {
        kraus.push_back(matrix_to_json(k));
    }
    return Json{{"dim", ch.dim()}, {"kraus", std::move(kraus)}, {"tp_flag", to_string(ch.tp_flag())}};
}

inline TpFlag tp_flag_from_string(const std::string &s, const std::string &path) {
    if (s == "preserving") {
        return TpFlag::Preserving;
    }
    if (s == "non_increasing") {
        return TpFlag::NonIncreasing;
    }
    if (s == "unchecked") {
        return TpFlag::Unchecked;
    }
    throw std::invalid_argument(path + ": unknown tp_flag '" + s + "'");
}

inline KrausChannel channel_from_json(const Json &j, const std::string &path) {
    if (!j.is_object() || !j.contains("kraus") || !j["kraus"].is_array()) {
        throw std::invalid_argument(path + ": expected {\"kraus\": [...]} ");
    }
    std::vector<ComplexMatrix> ks;
    for (std::size_t i = 0; i < j["kraus"].size(); ++i) {
        ks.push_back(matrix_from_json(j["kraus"][i], path + ".kraus[" + std::to_string(i) + "]"));
    }
    const TpFlag flag =
        j.contains("tp_flag") ? tp_flag_from_string(j["tp_flag"].get<std::string>(), path + ".tp_flag")
                              : TpFlag::Preserving;
    KrausChannel ch(std::move(ks), flag);
    if (j.contains("dim") && j["dim"].get<std::size_t>() != ch.dim()) {
        throw DimensionError(path + ".dim: does not match the Kraus operators");
    }
    return ch;
}

inline Json pattern_to_json(const IdentityPattern &p) {
    return Json{{"label", p.label()}, {"fixed_ids", p.fixed_ids}, {"interleave", p.interleave}};
}

inline Json curve_to_json(const ASFCurve &c) {
    Json pts = Json::array();
    for (const auto &pt : c.points()) {
        Json e{{"m", pt.m}, {"value", pt.value}};
        e["std_error"] = pt.std_error ? Json(*pt.std_error) : Json(nullptr);
        pts.push_back(std::move(e));
    }
    const auto &mt = c.meta();
    return Json{{"model_id", mt.model_id}, {"engine", to_string(mt.engine)}, {"seed", mt.seed},
                {"samples", mt.samples},    {"pattern", pattern_to_json(mt.pattern)},
                {"note", mt.note},          {"points", std::move(pts)}};
}

inline Json window_to_json(const MWindow &w) { return Json::array({w.lo, w.hi}); }

inline Json fit_to_json(const ExpFit &f) {
    return Json{{"A", f.a},
                {"p", f.p},
                {"B", f.b},
                {"rms_residual", f.rms_residual},
                {"max_residual", f.max_residual},
                {"converged", f.converged},
                {"iterations", f.iterations},
                {"diagnostic", f.diagnostic},
                {"window", window_to_json(f.window)}};
}

inline Json scan_report_to_json(const MemoryScanReport &r) {
    Json cands = Json::array();
    for (const auto &c : r.candidates) {
        cands.push_back(Json{{"k", c.k},
                             {"pattern", IdentityPattern::prefix(c.k).label()},
                             {"p", c.p},
                             {"window", window_to_json(c.window)},
                             {"fit_converged", c.fit_converged}});
    }
    return Json{{"ell_hat", r.ell_hat},
                {"matched_k", r.matched_k},
                {"matched_pattern", IdentityPattern::prefix(r.matched_k).label()},
                {"p_reference", r.p_reference},
                {"p_matched", r.p_matched},
                {"tolerance_used", r.tolerance_used},
                {"reference_window", window_to_json(r.reference_window)},
                {"reference_fit", fit_to_json(r.reference_fit)},
                {"converged", r.converged},
                {"candidates", std::move(cands)}};
}

inline Json coherence_report_to_json(const CoherenceReport &r) {
    Json fits = Json::array();
    for (const auto &f : r.fits) {
        fits.push_back(fit_to_json(f));
    }
    return Json{{"verdict", to_string(r.verdict)},
                {"threshold", r.threshold},
                {"statistics", r.statistics},
                {"fits", std::move(fits)}};
}

}  // namespace nmrb

#endif  // NMRB_JSON_IO_HPP
