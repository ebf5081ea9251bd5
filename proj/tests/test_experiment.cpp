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

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "nmrb/experiment.hpp"

namespace nmrb {
namespace {

namespace fs = std::filesystem;

const fs::path kSourceDir{NMRB_SOURCE_DIR};

std::string error_of(const std::string &text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError &e) {
        return e.what();
    }
    return "";
}

ExperimentConfig small_two_spin(const std::string &engines) {
    return parse_config_text(R"({"model": "two_spin",
        "params": {"J": 1.7, "h_x": 1.47, "h_y": -1.05, "delta": 0.029475},
        "run": {"m": [1, 2, 5, 10], "samples": 20, "seed": 9},
        "engines": )" + engines + "}");
}

std::vector<std::string> split_lines(const std::string &s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < s.size()) {
        const std::size_t end = s.find('\n', start);
        out.push_back(s.substr(start, end - start));
        start = end == std::string::npos ? s.size() : end + 1;
    }
    return out;
}

TEST(Config, ShippedConfigsRoundTrip) {
    std::size_t count = 0;
    for (const auto &entry : fs::directory_iterator(kSourceDir / "configs")) {
        const ExperimentConfig c = load_config(entry.path());
        const Json emitted = emit_config(c);
        const ExperimentConfig again = parse_config(emitted);
        EXPECT_EQ(emit_config(again).dump(), emitted.dump()) << entry.path();
        EXPECT_EQ(config_hash(again), config_hash(c));
        ++count;
    }
    EXPECT_GE(count, 10u);
}

TEST(Config, UnknownFieldIsNamedByPath) {
    const std::string msg = error_of(R"({"model": "two_spin",
        "params": {"J": 1, "h_x": 1, "h_y": 1, "delta": 0.1},
        "run": {"m": [1, 2], "sampels": 5}})");
    EXPECT_NE(msg.find("run.sampels: unknown field"), std::string::npos) << msg;
    EXPECT_NE(error_of(R"({"model": "two_spin", "paramz": {},
        "params": {"J": 1, "h_x": 1, "h_y": 1, "delta": 0.1}, "run": {"m": [1]}})")
                  .find("paramz: unknown field"),
              std::string::npos);
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
    const std::string msg = error_of("{\n  \"model\": \"two_spin\",\n  \"params\": {,}\n}");
    EXPECT_EQ(msg.rfind("<config>:3:14:", 0), 0u) << msg;
}

TEST(Config, FieldErrorsCarryPaths) {
    EXPECT_NE(error_of(R"({"model": "two_spin", "params": {"J": 1, "h_x": 1, "h_y": 1, "delta": "x"},
                          "run": {"m": [1]}})")
                  .find("params.delta: expected a number"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"model": "two_spin", "params": {"h_x": 1, "h_y": 1, "delta": 0.1}, "run": {"m": [1]}})")
                  .find("params.J: required field is missing"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"model": "two_spin", "params": {"J": 1, "h_x": 1, "h_y": 1, "delta": 0.1}})")
                  .find("run: required field is missing"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"model": "two_spin", "params": {"J": 1, "h_x": 1, "h_y": 1, "delta": 0.1},
                          "run": {"m": [1]}, "engines": ["analytical", "exact"]})")
                  .find("engines[1]"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"model": "two_spin", "params": {"J": 1, "h_x": 1, "h_y": 1, "delta": 0.1},
                          "run": {"m": [3, 2]}})")
                  .find("run.m"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"model": "nope", "run": {"m": [1]}})").find("model: unknown model"), std::string::npos);
}

TEST(Config, IntegersWrittenFromCodeAreAccepted) {
    Json j = emit_config(small_two_spin(R"(["analytical"])"));
    j["run"]["samples"] = 150;
    EXPECT_EQ(parse_config(j).run.samples, 150u);
    j["run"]["samples"] = -1;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, ClassicalModelsAcceptOnlyQuadrature) {
    const std::string msg = error_of(R"({"model": "classical_dephasing", "d_E": 0,
        "params": {"sigma": 0.015, "mode": "dc"}, "run": {"m": [1, 2]},
        "engines": ["analytical", "monte_carlo"]})");
    EXPECT_NE(msg.find("engines"), std::string::npos) << msg;
}

TEST(Config, EnginesAreCanonicallyOrdered) {
    const ExperimentConfig c = small_two_spin(R"(["oracle", "analytical", "oracle"])");
    EXPECT_EQ(c.engines, (std::vector<std::string>{"analytical", "oracle"}));
}

TEST(Commands, RepeatRunsAreByteIdentical) {
    const ExperimentConfig c = small_two_spin(R"(["analytical", "markovianized", "monte_carlo", "oracle"])");
    const CommandOutput a = run_command("asf", c, RunContext{1});
    const CommandOutput b = run_command("asf", c, RunContext{1});
    const CommandOutput t = run_command("asf", c, RunContext{3});
    ASSERT_EQ(a.files.size(), 2u);
    EXPECT_EQ(a.files, b.files);
    EXPECT_EQ(a.files, t.files);
}

TEST(Commands, CsvCarriesHashCommentAndHeader) {
    const ExperimentConfig c = small_two_spin(R"(["analytical", "monte_carlo"])");
    const CommandOutput out = run_command("asf", c, RunContext{});
    const auto lines = split_lines(out.files[0].second);
    EXPECT_EQ(out.files[0].first, "out.csv");
    EXPECT_EQ(lines[0], "# nmrb config_hash=" + config_hash(c) + " seed=9 command=asf");
    EXPECT_EQ(lines[1], "m,analytical,markovianized,mc_mean,mc_stderr");
    EXPECT_EQ(lines.size(), 6u);
    // Absent engines leave empty fields.
    EXPECT_NE(lines[2].find(",,"), std::string::npos);
    const Json side = Json::parse(out.files[1].second);
    EXPECT_EQ(side["nmrb_version"], kVersion);
    EXPECT_EQ(side["command"], "asf");
    EXPECT_EQ(side["config_hash"], config_hash(c));
    EXPECT_EQ(side["config"].dump(), emit_config(c).dump());
}

TEST(Commands, NoiselessModelGivesConstantCurve) {
    Json cfg = Json::parse(R"({"model": "custom_kraus", "run": {"m": {"lo": 1, "hi": 12}},
        "engines": ["analytical", "markovianized"]})");
    cfg["params"] = Json{{"channel", channel_to_json(KrausChannel::identity(4))}, {"acts_on", "SE"}};
    const ExperimentConfig c = parse_config(cfg);
    const AsfTable t = compute_asf_table(c, c.engines, RunContext{});
    for (std::size_t i = 0; i < t.m.size(); ++i) {
        EXPECT_NEAR((*t.analytical)[i].value, 1.0, 1e-14);
        EXPECT_NEAR((*t.markovianized)[i].value, 1.0, 1e-14);
    }
}

TEST(Commands, MarkovianizeFlagMatchesMarkovianizedEngine) {
    const ExperimentConfig plain = small_two_spin(R"(["markovianized"])");
    Json j = emit_config(plain);
    j["markovianize"] = true;
    j["engines"] = Json::array({"analytical"});
    const ExperimentConfig flagged = parse_config(j);
    const AsfTable a = compute_asf_table(plain, plain.engines, RunContext{});
    const AsfTable b = compute_asf_table(flagged, flagged.engines, RunContext{});
    for (std::size_t i = 0; i < a.m.size(); ++i) {
        EXPECT_NEAR((*a.markovianized)[i].value, (*b.analytical)[i].value, 1e-12);
    }
}

TEST(Commands, MissingScanSectionIsAConfigError) {
    const ExperimentConfig c = load_config(kSourceDir / "tests/data/missing_scan.json");
    try {
        run_command("memory-scan", c, RunContext{});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError &e) {
        EXPECT_NE(std::string(e.what()).find("analysis.scan"), std::string::npos);
        EXPECT_EQ(exit_code_for(e), ExitCode::Config);
    }
    EXPECT_THROW(run_command("coherence", c, RunContext{}), ConfigError);
    EXPECT_THROW(run_command("bogus", c, RunContext{}), ConfigError);
}

TEST(ExitCodes, MapExceptionKinds) {
    EXPECT_EQ(exit_code_for(ConfigError("x")), ExitCode::Config);
    EXPECT_EQ(exit_code_for(std::invalid_argument("x")), ExitCode::Config);
    EXPECT_EQ(exit_code_for(NumericError("x")), ExitCode::Numeric);
    EXPECT_EQ(exit_code_for(std::runtime_error("x")), ExitCode::Failure);
}

TEST(GitBlobSha1, KnownDigests) {
    EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(FormatDouble, RoundTripsExactly) {
    SeededRng rng(91);
    for (int i = 0; i < 1000; ++i) {
        const double x = (rng.uniform01() - 0.5) * std::pow(10.0, rng.normal() * 5.0);
        EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(WriteFileAtomic, WritesContentWithoutLeftovers) {
    const fs::path dir = fs::temp_directory_path() / ("nmrb_atomic_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    write_file_atomic(dir / "sub" / "a.csv", "first\n");
    write_file_atomic(dir / "sub" / "a.csv", "second\n");
    EXPECT_EQ(read_text_file(dir / "sub" / "a.csv"), "second\n");
    std::size_t n = 0;
    for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir / "sub")) {
        ++n;
    }
    EXPECT_EQ(n, 1u);
    fs::remove_all(dir);
}

TEST(ThreadSetting, FlagThenEnvironmentThenConfig) {
    EXPECT_EQ(resolve_thread_setting(4, "2", 1), 4u);
    EXPECT_EQ(resolve_thread_setting(std::nullopt, "2", 1), 2u);
    EXPECT_EQ(resolve_thread_setting(std::nullopt, nullptr, 3), 3u);
    EXPECT_EQ(resolve_thread_setting(std::nullopt, "", 3), 3u);
    EXPECT_THROW(resolve_thread_setting(std::nullopt, "two", 1), ConfigError);
}

TEST(JsonIo, ChannelRoundTrip) {
    SeededRng rng(92);
    const KrausChannel ch = random_cptp_channel(4, 3, rng);
    const KrausChannel back = channel_from_json(Json::parse(channel_to_json(ch).dump()), "ch");
    ASSERT_EQ(back.size(), ch.size());
    for (std::size_t i = 0; i < ch.size(); ++i) {
        EXPECT_TRUE(approx_equal(back.kraus()[i], ch.kraus()[i], 0.0));
    }
    EXPECT_EQ(back.tp_flag(), TpFlag::Preserving);
}

TEST(JsonIo, MatrixParsingReportsPaths) {
    const ComplexMatrix m = matrix_from_json(Json::parse("[[1, [0, 2]], [[0, -2], 3]]"), "M");
    EXPECT_EQ(m(0, 1), Complex(0.0, 2.0));
    EXPECT_EQ(m(1, 1), Complex(3.0, 0.0));
    try {
        matrix_from_json(Json::parse(R"([[1, "a"], [0, 1]])"), "povm");
        FAIL();
    } catch (const std::invalid_argument &e) {
        EXPECT_NE(std::string(e.what()).find("povm[0][1]"), std::string::npos);
    }
    EXPECT_THROW(matrix_from_json(Json::parse("[[1, 0], [0]]"), "M"), std::invalid_argument);
    EXPECT_THROW(channel_from_json(Json::parse(R"({"kraus": [[[1]]], "dim": 2})"), "ch"), DimensionError);
}

}  // namespace
}  // namespace nmrb
