// Copyright 2026 The modalflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Named experiments driven by a RunConfig, the run manifest, and the
// built-in verification suites.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "modalflow/config.hpp"
#include "modalflow/naimark.hpp"

namespace modalflow {

enum ExitCode : int { kExitOk = 0, kExitFailedChecks = 1, kExitConfig = 2, kExitNumeric = 3 };

struct Check {
    std::string name;
    bool passed = true;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;

    json to_json() const;
};

/// pass iff value <= threshold.
Check check_below(std::string name, double value, double threshold, std::string detail = {});
Check check_true(std::string name, bool ok, std::string detail = {});

struct ExperimentOutput {
    /// Paths relative to the output directory.
    std::vector<std::string> files;
    std::vector<Check> checks;
    json summary = json::object();
    std::vector<std::string> events;

    bool passed() const;
};

/// Runs cfg.experiment, writing outputs under cfg.output_dir. Throws
/// ConfigError for invalid parameters and modalflow::Error subclasses for
/// numerical failures.
ExperimentOutput run_experiment(const RunConfig& cfg, Parameters& params);

/// Full `run` command: loads the config, runs, writes manifest.json (also on
/// failure) and returns the exit code.
int run_command(const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
                std::ostream& out, std::ostream& err);

struct VerifyOptions {
    std::uint64_t seed = 2026;
    /// Trine extension read from this fixture instead of being built.
    std::optional<std::filesystem::path> trine_fixture;
};

struct SuiteResult {
    std::string suite;
    std::vector<Check> checks;
    bool passed() const;
};

/// The module invariant suites at reduced scale.
std::vector<SuiteResult> verify_all(const VerifyOptions& options);

/// Deterministic text report: one line per suite, then one per check.
std::string format_verify_report(const std::vector<SuiteResult>& suites);

/// Writes the trine extension fixture JSON.
void write_trine_fixture(const std::filesystem::path& path);

}  // namespace modalflow
