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

// Config-driven experiment runner behind the `nmrb` executable. Kept in a
// header so that parsing, command logic and output formatting are testable
// without spawning processes.

#ifndef NMRB_EXPERIMENT_HPP
#define NMRB_EXPERIMENT_HPP

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "nmrb/analysis.hpp"
#include "nmrb/asf.hpp"
#include "nmrb/classical.hpp"
#include "nmrb/fit.hpp"
#include "nmrb/json_io.hpp"
#include "nmrb/noise_models.hpp"
#include "nmrb/rb_sim.hpp"

namespace nmrb {

inline constexpr const char *kVersion = "0.1.0";

/// Malformed or inconsistent configuration (exit code 2).
class ConfigError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

enum class ExitCode : int { Ok = 0, Failure = 1, Config = 2, Numeric = 3 };

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Sequence lengths, either lo..hi in steps or an explicit list.
struct MGrid {
    std::optional<std::size_t> lo, hi, step;
    std::vector<std::size_t> list;

    std::vector<std::size_t> values() const {
        if (!lo) {
            return list;
        }
        std::vector<std::size_t> out;
        for (std::size_t m = *lo; m <= *hi; m += *step) {
            out.push_back(m);
        }
        return out;
    }
};

struct RunSettings {
    MGrid m;
    std::size_t samples = 50;
    GateSource gate_source = GateSource::Clifford24;
    std::vector<std::size_t> fixed_ids;
    std::size_t interleave = 0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    IdentityPattern pattern() const {
        IdentityPattern p;
        p.fixed_ids.insert(fixed_ids.begin(), fixed_ids.end());
        p.interleave = interleave;
        return p;
    }
};

struct ScanSettings {
    std::size_t max_k = 0;
    std::optional<MWindow> reference_window;
    double rel_tol = 0.01;
};

struct CoherenceSettings {
    std::vector<std::size_t> depths;
    std::optional<double> threshold;
};

struct BaselineSettings {
    BaselineConstraint constraint = BaselineConstraint::AEqualsB;
    double a = 1.0;
    double b = 0.0;
};

struct AnalysisSettings {
    std::optional<MWindow> fit_window;
    std::vector<double> q{1.0, kInfinityNorm};
    std::optional<ScanSettings> scan;
    std::optional<CoherenceSettings> coherence;
    BaselineSettings baseline;
};

struct OutputSettings {
    std::string path = "out";
    std::string format = "csv";
};

inline const std::vector<std::string> kEngineOrder{"analytical", "markovianized", "monte_carlo", "oracle"};
inline const std::vector<std::string> kModels{"two_spin",     "xx_spin",        "ising_chain",  "finite_memory",
                                              "custom_kraus", "classical_dephasing", "shallow_pocket"};

struct ExperimentConfig {
    std::string model;
    /// Model parameters, validated and stored in canonical key order.
    Json params;
    std::size_t d_s_qubits = 1;
    std::size_t d_e_qubits = 1;
    /// "zeros" or a matrix.
    Json rho0 = "zeros";
    /// "proj0" or a matrix.
    Json povm = "proj0";
    /// Null or {"kind": ..., ...}.
    Json spam_prep = nullptr;
    std::optional<double> spam_meas_rotation;
    bool markovianize = false;
    RunSettings run;
    std::vector<std::string> engines{"analytical"};
    AnalysisSettings analysis;
    OutputSettings output;

    bool has_engine(const std::string &e) const {
        return std::find(engines.begin(), engines.end(), e) != engines.end();
    }
    bool is_classical() const { return model == "classical_dephasing" || model == "shallow_pocket"; }
    Dims dims() const { return Dims{std::size_t{1} << d_e_qubits, std::size_t{1} << d_s_qubits}; }
};

namespace detail {

/// JSON stores integers written from code as signed; accept those when >= 0.
inline bool is_non_negative_integer(const Json &v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

/// Reads an object's fields by path and rejects unknown keys.
class FieldReader {
   public:
    FieldReader(const Json &obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError(where() + ": expected an object");
        }
    }

    std::string where(const std::string &key = "") const {
        if (key.empty()) {
            return path_.empty() ? "<root>" : path_;
        }
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string &key) {
        seen_.insert(key);
        return obj_.contains(key) && !obj_[key].is_null();
    }

    const Json &raw(const std::string &key) {
        if (!has(key)) {
            throw ConfigError(where(key) + ": required field is missing");
        }
        return obj_[key];
    }

    double number(const std::string &key) {
        const Json &v = raw(key);
        if (!v.is_number()) {
            throw ConfigError(where(key) + ": expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            throw ConfigError(where(key) + ": must be finite");
        }
        return d;
    }
    double number(const std::string &key, double dflt) { return has(key) ? number(key) : dflt; }

    std::uint64_t unsigned_int(const std::string &key) {
        const Json &v = raw(key);
        if (!is_non_negative_integer(v)) {
            throw ConfigError(where(key) + ": expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }
    std::uint64_t unsigned_int(const std::string &key, std::uint64_t dflt) {
        return has(key) ? unsigned_int(key) : dflt;
    }

    std::string string(const std::string &key) {
        const Json &v = raw(key);
        if (!v.is_string()) {
            throw ConfigError(where(key) + ": expected a string");
        }
        return v.get<std::string>();
    }
    std::string string(const std::string &key, const std::string &dflt) { return has(key) ? string(key) : dflt; }

    bool boolean(const std::string &key, bool dflt) {
        if (!has(key)) {
            return dflt;
        }
        if (!obj_[key].is_boolean()) {
            throw ConfigError(where(key) + ": expected true or false");
        }
        return obj_[key].get<bool>();
    }

    std::vector<std::size_t> index_list(const std::string &key) {
        const Json &v = raw(key);
        if (!v.is_array()) {
            throw ConfigError(where(key) + ": expected an array of non-negative integers");
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!is_non_negative_integer(v[i])) {
                throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected a non-negative integer");
            }
            out.push_back(v[i].get<std::size_t>());
        }
        return out;
    }

    std::optional<MWindow> window(const std::string &key) {
        if (!has(key)) {
            return std::nullopt;
        }
        const auto v = index_list(key);
        if (v.size() != 2 || v[0] > v[1]) {
            throw ConfigError(where(key) + ": expected [lo, hi] with lo <= hi");
        }
        return MWindow{v[0], v[1]};
    }

    /// Rejects keys that were never asked for (typos, stale fields).
    void finish() const {
        for (const auto &[k, v] : obj_.items()) {
            if (!seen_.contains(k)) {
                throw ConfigError(where(k) + ": unknown field");
            }
        }
    }

   private:
    const Json &obj_;
    std::string path_;
    std::set<std::string> seen_;
};

inline Json window_json(const std::optional<MWindow> &w) {
    return w ? Json::array({w->lo, w->hi}) : Json(nullptr);
}

inline std::string q_label(double q) {
    if (std::isinf(q)) {
        return "inf";
    }
    std::ostringstream os;
    os << q;
    return os.str();
}

/// Validated parameters of one model in canonical order.
inline Json parse_model_params(const std::string &model, const Json &params, const std::string &path) {
    FieldReader r(params, path);
    Json out = Json::object();
    auto num = [&](const char *k) { out[k] = r.number(k); };
    if (model == "two_spin" || model == "ising_chain") {
        num("J");
        num("h_x");
        num("h_y");
        num("delta");
    } else if (model == "xx_spin") {
        num("J_x");
        num("J_y");
        num("delta");
    } else if (model == "finite_memory") {
        out["ell"] = r.unsigned_int("ell");
        num("delta");
        num("delta_m_factor");
        num("J");
        num("h_x");
        num("h_y");
        if (out["ell"].get<std::size_t>() < 1 || !(out["delta"].get<double>() > 0.0)) {
            throw ConfigError(path + ": need ell >= 1 and delta > 0");
        }
    } else if (model == "custom_kraus") {
        const Json &ch = r.raw("channel");
        try {
            out["channel"] = channel_to_json(channel_from_json(ch, path + ".channel"));
        } catch (const ConfigError &) {
            throw;
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
        out["acts_on"] = r.string("acts_on", "SE");
        if (out["acts_on"] != "SE" && out["acts_on"] != "S") {
            throw ConfigError(path + ".acts_on: expected \"SE\" or \"S\"");
        }
    } else if (model == "classical_dephasing") {
        num("sigma");
        out["mode"] = r.string("mode");
        out["nodes"] = r.unsigned_int("nodes", kMinHermiteNodes);
        if (out["mode"] != "markovian" && out["mode"] != "dc") {
            throw ConfigError(path + ".mode: expected \"markovian\" or \"dc\"");
        }
        if (!(out["sigma"].get<double>() > 0.0)) {
            throw ConfigError(path + ".sigma: must be > 0");
        }
    } else if (model == "shallow_pocket") {
        num("gamma");
        const Json &taus = r.raw("taus");
        if (!taus.is_array() || taus.empty()) {
            throw ConfigError(path + ".taus: expected a non-empty array of numbers");
        }
        for (std::size_t i = 0; i < taus.size(); ++i) {
            if (!taus[i].is_number()) {
                throw ConfigError(path + ".taus[" + std::to_string(i) + "]: expected a number");
            }
        }
        out["taus"] = taus;
        if (!(out["gamma"].get<double>() > 0.0)) {
            throw ConfigError(path + ".gamma: must be > 0");
        }
    } else {
        throw ConfigError("model: unknown model '" + model + "'");
    }
    r.finish();
    return out;
}

}  // namespace detail

/// Builds a config from a parsed JSON tree. Absent optional fields take their
/// defaults; every field is checked for type and range.
inline ExperimentConfig parse_config(const Json &root) {
    using detail::FieldReader;
    ExperimentConfig c;
    FieldReader r(root, "");
    c.model = r.string("model");
    if (std::find(kModels.begin(), kModels.end(), c.model) == kModels.end()) {
        throw ConfigError("model: unknown model '" + c.model + "'");
    }
    c.params = detail::parse_model_params(c.model, r.has("params") ? root["params"] : Json::object(), "params");
    c.d_s_qubits = r.unsigned_int("d_S", 1);
    c.d_e_qubits = r.unsigned_int("d_E", 1);
    if (c.d_s_qubits < 1 || c.d_s_qubits + c.d_e_qubits > 6) {
        throw ConfigError("d_S, d_E: need d_S >= 1 and at most 6 qubits in total");
    }
    auto state_spec = [&](const char *key, const char *keyword) -> Json {
        if (!r.has(key)) {
            return keyword;
        }
        const Json &v = root[key];
        if (v.is_string()) {
            if (v != keyword) {
                throw ConfigError(std::string(key) + ": expected \"" + keyword + "\" or a matrix");
            }
            return v;
        }
        try {
            return matrix_to_json(matrix_from_json(v, key));
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
    };
    c.rho0 = state_spec("rho0", "zeros");
    c.povm = state_spec("povm", "proj0");
    if (r.has("spam")) {
        FieldReader s(root["spam"], "spam");
        if (s.has("prep")) {
            const Json &p = root["spam"]["prep"];
            FieldReader pr(p, "spam.prep");
            const std::string kind = pr.string("kind");
            Json prep{{"kind", kind}};
            if (kind == "hamiltonian" || kind == "rotation_x") {
                prep["angle"] = pr.number("angle");
            } else if (kind == "kraus") {
                try {
                    prep["channel"] = channel_to_json(channel_from_json(pr.raw("channel"), "spam.prep.channel"));
                } catch (const ConfigError &) {
                    throw;
                } catch (const std::invalid_argument &e) {
                    throw ConfigError(e.what());
                }
            } else {
                throw ConfigError("spam.prep.kind: expected \"hamiltonian\", \"rotation_x\" or \"kraus\"");
            }
            pr.finish();
            c.spam_prep = prep;
        }
        if (s.has("meas_rotation")) {
            c.spam_meas_rotation = s.number("meas_rotation");
        }
        s.finish();
    }
    c.markovianize = r.boolean("markovianize", false);

    if (r.has("run")) {
        FieldReader rr(root["run"], "run");
        const Json &m = rr.raw("m");
        if (m.is_array()) {
            c.run.m.list = rr.index_list("m");
        } else {
            FieldReader mr(m, "run.m");
            c.run.m.lo = mr.unsigned_int("lo");
            c.run.m.hi = mr.unsigned_int("hi");
            c.run.m.step = mr.unsigned_int("step", 1);
            mr.finish();
            if (*c.run.m.step < 1 || *c.run.m.lo > *c.run.m.hi) {
                throw ConfigError("run.m: need lo <= hi and step >= 1");
            }
        }
        const auto ms = c.run.m.values();
        if (ms.empty() || ms.front() < 1 || !std::is_sorted(ms.begin(), ms.end()) ||
            std::adjacent_find(ms.begin(), ms.end()) != ms.end()) {
            throw ConfigError("run.m: sequence lengths must be >= 1 and strictly increasing");
        }
        c.run.samples = rr.unsigned_int("samples", 50);
        if (c.run.samples < 1) {
            throw ConfigError("run.samples: must be >= 1");
        }
        const std::string gs = rr.string("gate_source", "clifford24");
        if (gs == "clifford24") {
            c.run.gate_source = GateSource::Clifford24;
        } else if (gs == "haar") {
            c.run.gate_source = GateSource::Haar;
        } else {
            throw ConfigError("run.gate_source: expected \"clifford24\" or \"haar\"");
        }
        if (rr.has("fixed_ids")) {
            c.run.fixed_ids = rr.index_list("fixed_ids");
            std::sort(c.run.fixed_ids.begin(), c.run.fixed_ids.end());
            c.run.fixed_ids.erase(std::unique(c.run.fixed_ids.begin(), c.run.fixed_ids.end()),
                                  c.run.fixed_ids.end());
            if (!c.run.fixed_ids.empty() && c.run.fixed_ids.front() < 1) {
                throw ConfigError("run.fixed_ids: step indices are 1-based");
            }
        }
        c.run.interleave = rr.unsigned_int("interleave", 0);
        if (c.run.interleave > 0 && !c.run.fixed_ids.empty()) {
            throw ConfigError("run: fixed_ids and interleave are mutually exclusive");
        }
        c.run.seed = rr.unsigned_int("seed", 0);
        c.run.threads = rr.unsigned_int("threads", 1);
        rr.finish();
    } else {
        throw ConfigError("run: required field is missing");
    }

    if (r.has("engines")) {
        const Json &e = root["engines"];
        if (!e.is_array() || e.empty()) {
            throw ConfigError("engines: expected a non-empty array");
        }
        std::set<std::string> names;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (!e[i].is_string() ||
                std::find(kEngineOrder.begin(), kEngineOrder.end(), e[i].get<std::string>()) == kEngineOrder.end()) {
                throw ConfigError("engines[" + std::to_string(i) +
                                  "]: expected one of analytical, markovianized, monte_carlo, oracle");
            }
            names.insert(e[i].get<std::string>());
        }
        c.engines.clear();
        for (const auto &n : kEngineOrder) {
            if (names.contains(n)) {
                c.engines.push_back(n);
            }
        }
    }
    if (c.is_classical() && (c.engines.size() != 1 || c.engines.front() != "analytical")) {
        throw ConfigError("engines: classical models are averaged by quadrature; only \"analytical\" applies");
    }

    if (r.has("analysis")) {
        FieldReader ar(root["analysis"], "analysis");
        c.analysis.fit_window = ar.window("fit_window");
        if (ar.has("q")) {
            const Json &q = root["analysis"]["q"];
            if (!q.is_array() || q.empty()) {
                throw ConfigError("analysis.q: expected a non-empty array");
            }
            c.analysis.q.clear();
            for (std::size_t i = 0; i < q.size(); ++i) {
                if (q[i] == "inf") {
                    c.analysis.q.push_back(kInfinityNorm);
                } else if (q[i].is_number() && q[i].get<double>() >= 1.0) {
                    c.analysis.q.push_back(q[i].get<double>());
                } else {
                    throw ConfigError("analysis.q[" + std::to_string(i) + "]: expected a number >= 1 or \"inf\"");
                }
            }
        }
        if (ar.has("scan")) {
            FieldReader sr(root["analysis"]["scan"], "analysis.scan");
            ScanSettings s;
            s.max_k = sr.unsigned_int("max_k");
            if (s.max_k < 1) {
                throw ConfigError("analysis.scan.max_k: need at least one identity-fixed pattern");
            }
            s.reference_window = sr.window("reference_window");
            s.rel_tol = sr.number("rel_tol", 0.01);
            if (!(s.rel_tol > 0.0)) {
                throw ConfigError("analysis.scan.rel_tol: must be > 0");
            }
            sr.finish();
            c.analysis.scan = s;
        }
        if (ar.has("coherence")) {
            FieldReader cr(root["analysis"]["coherence"], "analysis.coherence");
            CoherenceSettings s;
            s.depths = cr.index_list("depths");
            if (s.depths.size() < 2 || !std::is_sorted(s.depths.begin(), s.depths.end()) ||
                std::adjacent_find(s.depths.begin(), s.depths.end()) != s.depths.end()) {
                throw ConfigError("analysis.coherence.depths: need at least two strictly increasing depths");
            }
            if (cr.has("threshold")) {
                s.threshold = cr.number("threshold");
            }
            cr.finish();
            c.analysis.coherence = s;
        }
        if (ar.has("baseline")) {
            FieldReader br(root["analysis"]["baseline"], "analysis.baseline");
            const std::string k = br.string("constraint");
            if (k == "A_eq_B") {
                c.analysis.baseline.constraint = BaselineConstraint::AEqualsB;
            } else if (k == "A_plus_B_eq_1") {
                c.analysis.baseline.constraint = BaselineConstraint::APlusBEqualsOne;
            } else if (k == "custom") {
                c.analysis.baseline.constraint = BaselineConstraint::Custom;
                c.analysis.baseline.a = br.number("A");
                c.analysis.baseline.b = br.number("B");
            } else {
                throw ConfigError("analysis.baseline.constraint: expected A_eq_B, A_plus_B_eq_1 or custom");
            }
            br.finish();
        }
        ar.finish();
    }

    if (r.has("output")) {
        FieldReader orr(root["output"], "output");
        c.output.path = orr.string("path", "out");
        c.output.format = orr.string("format", "csv");
        orr.finish();
        if (c.output.path.empty() || c.output.path.find('/') != std::string::npos) {
            throw ConfigError("output.path: expected a plain file stem");
        }
        if (c.output.format != "csv" && c.output.format != "json") {
            throw ConfigError("output.format: expected \"csv\" or \"json\"");
        }
    }
    r.finish();
    return c;
}

/// Canonical form: every field present, fixed key order, engines in fixed
/// order. parse_config(emit_config(c)) emits identically.
inline Json emit_config(const ExperimentConfig &c) {
    Json j = Json::object();
    j["model"] = c.model;
    j["params"] = c.params;
    j["d_S"] = c.d_s_qubits;
    j["d_E"] = c.d_e_qubits;
    j["rho0"] = c.rho0;
    j["povm"] = c.povm;
    j["spam"] = Json{{"prep", c.spam_prep},
                     {"meas_rotation", c.spam_meas_rotation ? Json(*c.spam_meas_rotation) : Json(nullptr)}};
    j["markovianize"] = c.markovianize;
    Json m;
    if (c.run.m.lo) {
        m = Json{{"lo", *c.run.m.lo}, {"hi", *c.run.m.hi}, {"step", *c.run.m.step}};
    } else {
        m = c.run.m.list;
    }
    j["run"] = Json{{"m", m},
                    {"samples", c.run.samples},
                    {"gate_source", c.run.gate_source == GateSource::Clifford24 ? "clifford24" : "haar"},
                    {"fixed_ids", c.run.fixed_ids},
                    {"interleave", c.run.interleave},
                    {"seed", c.run.seed},
                    {"threads", c.run.threads}};
    j["engines"] = c.engines;
    Json q = Json::array();
    for (double v : c.analysis.q) {
        q.push_back(std::isinf(v) ? Json("inf") : Json(v));
    }
    Json a{{"fit_window", detail::window_json(c.analysis.fit_window)}, {"q", q}};
    a["scan"] = c.analysis.scan ? Json{{"max_k", c.analysis.scan->max_k},
                                       {"reference_window", detail::window_json(c.analysis.scan->reference_window)},
                                       {"rel_tol", c.analysis.scan->rel_tol}}
                                : Json(nullptr);
    a["coherence"] =
        c.analysis.coherence
            ? Json{{"depths", c.analysis.coherence->depths},
                   {"threshold", c.analysis.coherence->threshold ? Json(*c.analysis.coherence->threshold)
                                                                 : Json(nullptr)}}
            : Json(nullptr);
    Json b{{"constraint", to_string(c.analysis.baseline.constraint)}};
    if (c.analysis.baseline.constraint == BaselineConstraint::Custom) {
        b["A"] = c.analysis.baseline.a;
        b["B"] = c.analysis.baseline.b;
    }
    a["baseline"] = b;
    j["analysis"] = a;
    j["output"] = Json{{"path", c.output.path}, {"format", c.output.format}};
    return j;
}

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string &text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline ExperimentConfig parse_config_text(const std::string &text, const std::string &source = "<config>") {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error &e) {
        // e.byte is one past the offending character.
        const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": JSON syntax error: " + e.what());
    }
    try {
        return parse_config(root);
    } catch (const ConfigError &e) {
        throw ConfigError(source + ": " + e.what());
    } catch (const Json::exception &e) {
        throw ConfigError(source + ": " + e.what());
    }
}

inline std::string read_text_file(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file " + p.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline ExperimentConfig load_config(const std::filesystem::path &p) {
    return parse_config_text(read_text_file(p), p.string());
}

// ---------------------------------------------------------------------------
// Hashing and output
// ---------------------------------------------------------------------------

/// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_sha1(const std::string &content) {
    const std::string data = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
        throw std::runtime_error("git_blob_sha1: digest failed");
    }
    static const char *hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

inline std::string config_hash(const ExperimentConfig &c) { return git_blob_sha1(emit_config(c).dump()); }

/// 17 significant digits, enough to round-trip every double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes via a temporary file in the same directory and renames it over the
/// target, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path &target, const std::string &content) {
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
    }
    const std::filesystem::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

/// Hamiltonian on E (x) S of a Hamiltonian-driven model.
inline ComplexMatrix model_hamiltonian(const ExperimentConfig &c) {
    const Json &p = c.params;
    if (c.model == "two_spin" || c.model == "finite_memory") {
        return two_spin_hamiltonian(p["J"].get<double>(), p["h_x"].get<double>(), p["h_y"].get<double>());
    }
    if (c.model == "xx_spin") {
        return xx_spin_hamiltonian(p["J_x"].get<double>(), p["J_y"].get<double>());
    }
    if (c.model == "ising_chain") {
        return ising_chain_hamiltonian(c.d_e_qubits + c.d_s_qubits, p["J"].get<double>(), p["h_x"].get<double>(),
                                       p["h_y"].get<double>());
    }
    throw ConfigError("model '" + c.model + "' has no Hamiltonian");
}

/// Noise process described by a quantum-model config, with SPAM and the
/// optional Markovianization (environment input |0>) applied.
inline NoiseProcess build_process(const ExperimentConfig &c) {
    if (c.is_classical()) {
        throw ConfigError("model '" + c.model + "' is classical and has no quantum noise process");
    }
    const Dims dims = c.dims();
    const bool two_qubit = c.model == "two_spin" || c.model == "xx_spin" || c.model == "finite_memory";
    if (two_qubit && (c.d_s_qubits != 1 || c.d_e_qubits != 1)) {
        throw ConfigError("d_S, d_E: model '" + c.model + "' is defined for one system and one environment qubit");
    }
    if (c.model == "ising_chain" && (c.d_s_qubits != 1 || c.d_e_qubits < 1)) {
        throw ConfigError("d_S, d_E: ising_chain needs one system qubit and at least one environment qubit");
    }
    DensityOperator rho0 = c.rho0.is_string() ? DensityOperator::all_zeros(dims)
                                              : DensityOperator(matrix_from_json(c.rho0, "rho0"), dims);
    const ComplexMatrix povm = c.povm.is_string() ? basis_projector(dims.sys, 0) : matrix_from_json(c.povm, "povm");
    StepGenerator gen;
    if (c.model == "finite_memory") {
        const DensityOperator eps = DensityOperator::on_system(basis_projector(dims.env, 0));
        gen = finite_memory_schedule(c.params["ell"].get<std::size_t>(), c.params["delta"].get<double>(),
                                     c.params["delta_m_factor"].get<double>(), model_hamiltonian(c), eps, dims);
    } else if (c.model == "custom_kraus") {
        const KrausChannel ch = channel_from_json(c.params["channel"], "params.channel");
        if (c.params["acts_on"] == "S") {
            gen = constant_steps(SystemOnlyStep{ch});
        } else {
            gen = constant_steps(JointStep{ch});
        }
    } else {
        gen = constant_steps(JointStep{hamiltonian_channel(model_hamiltonian(c), c.params["delta"].get<double>())});
    }
    NoiseProcess process(dims, std::move(rho0), std::move(gen), povm, c.model);
    // Validate the first step eagerly so dimension errors surface as config errors.
    process.joint_step(1);

    SpamSpec spam;
    if (!c.spam_prep.is_null()) {
        const std::string kind = c.spam_prep["kind"].get<std::string>();
        if (kind == "hamiltonian") {
            spam.prep = hamiltonian_channel(model_hamiltonian(c), c.spam_prep["angle"].get<double>());
        } else if (kind == "rotation_x") {
            spam.prep = hamiltonian_channel(pauli_x(), c.spam_prep["angle"].get<double>());
        } else {
            spam.prep = channel_from_json(c.spam_prep["channel"], "spam.prep.channel");
        }
    }
    spam.meas_rotation = c.spam_meas_rotation;
    if (spam.prep || spam.meas_rotation) {
        process = apply_spam(process, spam);
    }
    if (c.markovianize) {
        process = markovianized_process(process);
    }
    return process;
}

inline ASFCurve classical_curve(const ExperimentConfig &c, const std::vector<std::size_t> &ms) {
    ASFCurve out;
    if (c.model == "classical_dephasing") {
        const DephasingMode mode = c.params["mode"] == "dc" ? DephasingMode::DC : DephasingMode::Markovian;
        const ASFCurve full = classical_dephasing_asf(c.params["sigma"].get<double>(), ms.back(), mode,
                                                      c.params["nodes"].get<std::size_t>());
        CurveMeta meta = full.meta();
        out = ASFCurve(meta);
        for (auto m : ms) {
            out.push_back(m, full.at(m));
        }
        return out;
    }
    const double gamma = c.params["gamma"].get<double>();
    std::vector<double> taus = c.params["taus"].get<std::vector<double>>();
    if (taus.size() == 1) {
        taus.assign(ms.back(), taus.front());
    }
    if (taus.size() < ms.back()) {
        throw ConfigError("params.taus: need one tau per step up to m=" + std::to_string(ms.back()) +
                          " (or a single tau)");
    }
    CurveMeta meta;
    meta.model_id = "shallow_pocket";
    meta.engine = Engine::Quadrature;
    out = ASFCurve(meta);
    for (auto m : ms) {
        out.push_back(m, shallow_pocket_asf(gamma, taus, m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Execution settings that do not change results.
struct RunContext {
    std::size_t threads = 1;
};

/// One row per m; absent engines leave empty fields.
struct AsfTable {
    std::vector<std::size_t> m;
    std::optional<ASFCurve> analytical;
    std::optional<ASFCurve> markovianized;
    std::optional<ASFCurve> monte_carlo;
    /// Exact Clifford enumeration at m <= 2 (empty pattern only).
    std::vector<std::pair<std::size_t, double>> oracle;
};

inline RBRunConfig rb_config(const ExperimentConfig &c, const std::vector<std::size_t> &ms,
                             const IdentityPattern &pattern, const RunContext &ctx) {
    RBRunConfig r;
    r.m_values = ms;
    r.samples_per_m = c.run.samples;
    r.gate_source = c.run.gate_source;
    r.pattern = pattern;
    r.seed = c.run.seed;
    r.threads = ctx.threads;
    return r;
}

inline void require_qubit_system(const ExperimentConfig &c, const char *what) {
    if (c.d_s_qubits != 1) {
        throw ConfigError(std::string(what) + ": gate sources are defined for one system qubit (d_S = 1)");
    }
}

inline AsfTable compute_asf_table(const ExperimentConfig &c, const std::vector<std::string> &engines,
                                  const RunContext &ctx) {
    AsfTable t;
    t.m = c.run.m.values();
    auto wants = [&](const char *e) { return std::find(engines.begin(), engines.end(), e) != engines.end(); };
    if (c.is_classical()) {
        if (!wants("analytical")) {
            throw ConfigError("engines: classical models support only the analytical (quadrature) engine");
        }
        t.analytical = classical_curve(c, t.m);
        return t;
    }
    const NoiseProcess process = build_process(c);
    const IdentityPattern pattern = c.run.pattern();
    if (wants("analytical")) {
        t.analytical = asf_curve(process, t.m, pattern);
    }
    if (wants("markovianized")) {
        t.markovianized = pattern.empty() ? markovianized_asf(process, t.m)
                                          : asf_curve(markovianized_process(process), t.m, pattern);
    }
    if (wants("monte_carlo")) {
        require_qubit_system(c, "monte_carlo");
        t.monte_carlo = run_rb(process, rb_config(c, t.m, pattern, ctx));
    }
    if (wants("oracle")) {
        require_qubit_system(c, "oracle");
        if (!pattern.empty()) {
            throw ConfigError("engines: the oracle evaluates the unmodified protocol only");
        }
        for (auto m : t.m) {
            if (m <= 2) {
                t.oracle.emplace_back(m, asf_oracle_clifford_enum(process, m));
            }
        }
    }
    return t;
}

inline std::string csv_comment(const ExperimentConfig &c, const std::string &command) {
    return "# nmrb config_hash=" + config_hash(c) + " seed=" + std::to_string(c.run.seed) + " command=" + command +
           "\n";
}

inline std::string asf_table_csv(const AsfTable &t, const ExperimentConfig &c, const std::string &command) {
    std::string out = csv_comment(c, command);
    out += "m,analytical,markovianized,mc_mean,mc_stderr\n";
    for (std::size_t i = 0; i < t.m.size(); ++i) {
        out += std::to_string(t.m[i]);
        out += ",";
        if (t.analytical) {
            out += format_double((*t.analytical)[i].value);
        }
        out += ",";
        if (t.markovianized) {
            out += format_double((*t.markovianized)[i].value);
        }
        out += ",";
        if (t.monte_carlo) {
            out += format_double((*t.monte_carlo)[i].value);
        }
        out += ",";
        if (t.monte_carlo && (*t.monte_carlo)[i].std_error) {
            out += format_double(*(*t.monte_carlo)[i].std_error);
        }
        out += "\n";
    }
    return out;
}

/// Single curve in the common CSV layout, in the column of its engine.
inline std::string curve_csv(const ASFCurve &curve, const ExperimentConfig &c, const std::string &command) {
    AsfTable t;
    t.m = curve.m_values();
    if (curve.meta().engine == Engine::MonteCarlo) {
        t.monte_carlo = curve;
    } else if (curve.meta().engine == Engine::Markovianized) {
        t.markovianized = curve;
    } else {
        t.analytical = curve;
    }
    return asf_table_csv(t, c, command);
}

inline Json asf_table_json(const AsfTable &t) {
    Json j = Json::object();
    if (t.analytical) {
        j["analytical"] = curve_to_json(*t.analytical);
    }
    if (t.markovianized) {
        j["markovianized"] = curve_to_json(*t.markovianized);
    }
    if (t.monte_carlo) {
        j["monte_carlo"] = curve_to_json(*t.monte_carlo);
    }
    return j;
}

inline Json oracle_json(const AsfTable &t) {
    Json o = Json::array();
    for (const auto &[m, v] : t.oracle) {
        Json e{{"m", m}, {"value", v}};
        if (t.analytical) {
            e["analytical"] = t.analytical->at(m);
            e["abs_difference"] = std::abs(t.analytical->at(m) - v);
        }
        o.push_back(std::move(e));
    }
    return o;
}

/// Files written by one command, keyed by file name, in write order.
struct CommandOutput {
    std::vector<std::pair<std::string, std::string>> files;
    /// Main result document (also embedded in the JSON output file).
    Json results = Json::object();
};

namespace detail {

inline Json sidecar(const ExperimentConfig &c, const std::string &command, Json results) {
    return Json{{"nmrb_version", kVersion},
                {"command", command},
                {"config_hash", config_hash(c)},
                {"seed", c.run.seed},
                {"config", emit_config(c)},
                {"results", std::move(results)}};
}

/// Curve engine for analyses that need one curve per pattern: analytical
/// when configured, otherwise Monte-Carlo.
inline bool use_monte_carlo(const ExperimentConfig &c, const char *command) {
    if (c.has_engine("analytical")) {
        return false;
    }
    if (c.has_engine("monte_carlo")) {
        return true;
    }
    throw ConfigError(std::string("engines: ") + command + " needs the analytical or monte_carlo engine");
}

inline ASFCurve pattern_curve(const ExperimentConfig &c, const NoiseProcess &process,
                              const std::vector<std::size_t> &ms, const IdentityPattern &pattern,
                              const RunContext &ctx, bool monte_carlo) {
    if (monte_carlo) {
        require_qubit_system(c, "monte_carlo");
        return run_rb(process, rb_config(c, ms, pattern, ctx));
    }
    return asf_curve(process, ms, pattern);
}

inline void finish_table_output(CommandOutput &out, const ExperimentConfig &c, const std::string &command,
                                const AsfTable &t) {
    const std::string stem = c.output.path;
    if (c.output.format == "csv") {
        out.files.emplace_back(stem + ".csv", asf_table_csv(t, c, command));
    } else {
        out.results["curves"] = asf_table_json(t);
    }
    out.files.emplace_back(stem + ".json", sidecar(c, command, out.results).dump(2) + "\n");
}

}  // namespace detail

inline CommandOutput cmd_asf(const ExperimentConfig &c, const RunContext &ctx) {
    CommandOutput out;
    const AsfTable t = compute_asf_table(c, c.engines, ctx);
    out.results["oracle"] = oracle_json(t);
    detail::finish_table_output(out, c, "asf", t);
    return out;
}

/// Monte-Carlo curve only, whatever engines the config lists.
inline CommandOutput cmd_simulate(const ExperimentConfig &c, const RunContext &ctx) {
    if (c.is_classical()) {
        throw ConfigError("simulate: classical models have no gate-level simulation");
    }
    CommandOutput out;
    const AsfTable t = compute_asf_table(c, {"monte_carlo"}, ctx);
    detail::finish_table_output(out, c, "simulate", t);
    return out;
}

/// Exponential fit of every configured curve plus the constrained baseline
/// built from the first fitted curve.
inline CommandOutput cmd_fit(const ExperimentConfig &c, const RunContext &ctx) {
    CommandOutput out;
    std::vector<std::string> engines;
    for (const auto &e : c.engines) {
        if (e != "oracle") {
            engines.push_back(e);
        }
    }
    if (engines.empty()) {
        throw ConfigError("engines: fit needs at least one curve engine");
    }
    const AsfTable t = compute_asf_table(c, engines, ctx);
    Json fits = Json::object();
    std::optional<ExpFit> first;
    auto add = [&](const char *name, const std::optional<ASFCurve> &curve) {
        if (curve) {
            const ExpFit f = fit_exponential(*curve, c.analysis.fit_window);
            fits[name] = fit_to_json(f);
            if (!first) {
                first = f;
            }
        }
    };
    add("analytical", t.analytical);
    add("markovianized", t.markovianized);
    add("monte_carlo", t.monte_carlo);
    out.results["fits"] = fits;
    const auto &bl = c.analysis.baseline;
    const ASFCurve baseline = markovianized_baseline(*first, bl.constraint, t.m, bl.a, bl.b);
    out.results["baseline"] = curve_to_json(baseline);
    detail::finish_table_output(out, c, "fit", t);
    return out;
}

/// RB non-Markovianity of the analytical curve against its Markovianization.
inline CommandOutput cmd_nonmarkov(const ExperimentConfig &c, const RunContext &ctx) {
    if (c.is_classical()) {
        throw ConfigError("nonmarkov: classical models have no Markovianization");
    }
    CommandOutput out;
    const AsfTable t = compute_asf_table(c, {"analytical", "markovianized"}, ctx);
    Json nq = Json::array();
    for (double q : c.analysis.q) {
        nq.push_back(Json{{"q", detail::q_label(q)},
                          {"value", rb_nonmarkovianity(*t.analytical, *t.markovianized, q)}});
    }
    out.results["N_q"] = nq;
    detail::finish_table_output(out, c, "nonmarkov", t);
    return out;
}

/// Unmodified curve plus prefixes {1..k}, k = 1..max_k, then the scan.
inline CommandOutput cmd_memory_scan(const ExperimentConfig &c, const RunContext &ctx) {
    if (!c.analysis.scan) {
        throw ConfigError("analysis.scan: memory-scan needs the identity-fixing patterns (max_k)");
    }
    if (c.is_classical()) {
        throw ConfigError("memory-scan: classical models have no gate-level protocol");
    }
    const bool mc = detail::use_monte_carlo(c, "memory-scan");
    const NoiseProcess process = build_process(c);
    const auto ms = c.run.m.values();
    std::vector<ASFCurve> curves;
    CommandOutput out;
    for (std::size_t k = 0; k <= c.analysis.scan->max_k; ++k) {
        std::vector<std::size_t> grid;
        for (auto m : ms) {
            if (m > k) {
                grid.push_back(m);
            }
        }
        if (grid.size() < 4) {
            throw ConfigError("run.m: pattern {1.." + std::to_string(k) + "} leaves fewer than 4 points to fit");
        }
        curves.push_back(detail::pattern_curve(c, process, grid, IdentityPattern::prefix(k), ctx, mc));
    }
    const MemoryScanReport rep =
        memory_length_scan(curves, c.analysis.scan->reference_window, c.analysis.scan->rel_tol);
    out.results["report"] = scan_report_to_json(rep);
    for (std::size_t k = 0; k < curves.size(); ++k) {
        if (c.output.format == "csv") {
            out.files.emplace_back(c.output.path + ".k" + std::to_string(k) + ".csv",
                                   curve_csv(curves[k], c, "memory-scan"));
        } else {
            out.results["curves"].push_back(curve_to_json(curves[k]));
        }
    }
    out.files.emplace_back(c.output.path + ".json",
                           detail::sidecar(c, "memory-scan", out.results).dump(2) + "\n");
    return out;
}

/// Curves with k identities after every random gate, k over the configured
/// depths (0 being the unmodified protocol), then the verdict.
inline CommandOutput cmd_coherence(const ExperimentConfig &c, const RunContext &ctx) {
    if (!c.analysis.coherence) {
        throw ConfigError("analysis.coherence: coherence needs the interleaving depths");
    }
    if (c.is_classical()) {
        throw ConfigError("coherence: classical models have no gate-level protocol");
    }
    const bool mc = detail::use_monte_carlo(c, "coherence");
    const NoiseProcess process = build_process(c);
    const auto ms = c.run.m.values();
    std::vector<ASFCurve> curves;
    for (auto k : c.analysis.coherence->depths) {
        curves.push_back(detail::pattern_curve(c, process, ms, IdentityPattern::interleaved(k), ctx, mc));
    }
    const CoherenceReport rep = coherence_diagnosis(curves, c.analysis.coherence->threshold);
    CommandOutput out;
    out.results["report"] = coherence_report_to_json(rep);
    out.results["depths"] = c.analysis.coherence->depths;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (c.output.format == "csv") {
            out.files.emplace_back(c.output.path + ".depth" + std::to_string(c.analysis.coherence->depths[i]) + ".csv",
                                   curve_csv(curves[i], c, "coherence"));
        } else {
            out.results["curves"].push_back(curve_to_json(curves[i]));
        }
    }
    out.files.emplace_back(c.output.path + ".json", detail::sidecar(c, "coherence", out.results).dump(2) + "\n");
    return out;
}

inline const std::vector<std::string> &command_names() {
    static const std::vector<std::string> names{"asf", "simulate", "fit", "memory-scan", "nonmarkov", "coherence"};
    return names;
}

inline CommandOutput run_command(const std::string &command, const ExperimentConfig &c, const RunContext &ctx) {
    if (command == "asf") {
        return cmd_asf(c, ctx);
    }
    if (command == "simulate") {
        return cmd_simulate(c, ctx);
    }
    if (command == "fit") {
        return cmd_fit(c, ctx);
    }
    if (command == "memory-scan") {
        return cmd_memory_scan(c, ctx);
    }
    if (command == "nonmarkov") {
        return cmd_nonmarkov(c, ctx);
    }
    if (command == "coherence") {
        return cmd_coherence(c, ctx);
    }
    throw ConfigError("unknown command '" + command + "'");
}

inline void write_outputs(const CommandOutput &out, const std::filesystem::path &dir) {
    for (const auto &[name, content] : out.files) {
        write_file_atomic(dir / name, content);
    }
}

/// Thread count: explicit flag, then NMRB_THREADS, then the config.
inline std::size_t resolve_thread_setting(std::optional<std::size_t> flag, const char *env_value,
                                          std::size_t config_value) {
    if (flag) {
        return *flag;
    }
    if (env_value != nullptr && *env_value != '\0') {
        char *end = nullptr;
        const unsigned long long v = std::strtoull(env_value, &end, 10);
        if (end == env_value || *end != '\0') {
            throw ConfigError(std::string("NMRB_THREADS: expected a non-negative integer, got '") + env_value + "'");
        }
        return static_cast<std::size_t>(v);
    }
    return config_value;
}

/// Maps an exception from loading or running a command to its exit code.
inline ExitCode exit_code_for(const std::exception &e) {
    if (dynamic_cast<const NumericError *>(&e) != nullptr) {
        return ExitCode::Numeric;
    }
    if (dynamic_cast<const std::invalid_argument *>(&e) != nullptr ||
        dynamic_cast<const std::out_of_range *>(&e) != nullptr) {
        return ExitCode::Config;
    }
    return ExitCode::Failure;
}

}  // namespace nmrb

#endif  // NMRB_EXPERIMENT_HPP
