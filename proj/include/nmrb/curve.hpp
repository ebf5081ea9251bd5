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

#ifndef NMRB_CURVE_HPP
#define NMRB_CURVE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmrb {

enum class Engine { Analytical, MonteCarlo, Oracle, Markovianized, Quadrature };

inline const char *to_string(Engine e) {
    switch (e) {
        case Engine::Analytical:
            return "analytical";
        case Engine::MonteCarlo:
            return "monte-carlo";
        case Engine::Oracle:
            return "oracle";
        case Engine::Markovianized:
            return "markovianized";
        case Engine::Quadrature:
            return "quadrature";
    }
    return "analytical";
}

/// Which gates are pinned to the identity in a modified protocol.
/// Either an explicit step set or k identities after every random gate.
struct IdentityPattern {
    std::set<std::size_t> fixed_ids;
    std::size_t interleave = 0;

    bool empty() const { return fixed_ids.empty() && interleave == 0; }
    bool operator==(const IdentityPattern &) const = default;

    static IdentityPattern prefix(std::size_t k) {
        IdentityPattern p;
        for (std::size_t i = 1; i <= k; ++i) {
            p.fixed_ids.insert(i);
        }
        return p;
    }

    static IdentityPattern interleaved(std::size_t k) {
        IdentityPattern p;
        p.interleave = k;
        return p;
    }

    std::string label() const {
        if (interleave > 0) {
            return "interleave:" + std::to_string(interleave);
        }
        if (fixed_ids.empty()) {
            return "none";
        }
        std::string s = "fixed:";
        bool first = true;
        for (auto i : fixed_ids) {
            s += (first ? "" : ",") + std::to_string(i);
            first = false;
        }
        return s;
    }
};

struct CurvePoint {
    std::size_t m = 0;
    double value = 0.0;
    std::optional<double> std_error;
};

struct CurveMeta {
    std::string model_id;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    IdentityPattern pattern;
    Engine engine = Engine::Analytical;
    /// Free-form provenance, e.g. the constraint used for a baseline curve.
    std::string note;
};

/// Points (m, F_m, stderr?) with strictly increasing m.
class ASFCurve {
   public:
    ASFCurve() = default;
    explicit ASFCurve(CurveMeta meta) : meta_(std::move(meta)) {}

    void push_back(CurvePoint p) {
        if (!points_.empty() && p.m <= points_.back().m) {
            throw std::invalid_argument("ASFCurve: m must be strictly increasing");
        }
        if (!std::isfinite(p.value)) {
            throw std::invalid_argument("ASFCurve: non-finite value at m=" + std::to_string(p.m));
        }
        points_.push_back(p);
    }

    void push_back(std::size_t m, double value, std::optional<double> se = std::nullopt) {
        push_back(CurvePoint{m, value, se});
    }

    const std::vector<CurvePoint> &points() const { return points_; }
    const CurveMeta &meta() const { return meta_; }
    CurveMeta &meta() { return meta_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const CurvePoint &operator[](std::size_t i) const { return points_[i]; }

    std::vector<std::size_t> m_values() const {
        std::vector<std::size_t> out;
        for (const auto &p : points_) {
            out.push_back(p.m);
        }
        return out;
    }

    std::vector<double> values() const {
        std::vector<double> out;
        for (const auto &p : points_) {
            out.push_back(p.value);
        }
        return out;
    }

    /// Value at m; throws if m is not on the grid.
    double at(std::size_t m) const {
        for (const auto &p : points_) {
            if (p.m == m) {
                return p.value;
            }
        }
        throw std::out_of_range("ASFCurve: m=" + std::to_string(m) + " not on grid");
    }

    /// Points with lo <= m <= hi.
    ASFCurve window(std::size_t lo, std::size_t hi) const {
        ASFCurve out(meta_);
        for (const auto &p : points_) {
            if (p.m >= lo && p.m <= hi) {
                out.push_back(p);
            }
        }
        return out;
    }

   private:
    CurveMeta meta_;
    std::vector<CurvePoint> points_;
};

/// 1..n as a grid.
inline std::vector<std::size_t> m_range(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out;
    for (std::size_t m = lo; m <= hi; ++m) {
        out.push_back(m);
    }
    return out;
}

}  // namespace nmrb

#endif  // NMRB_CURVE_HPP
