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


// modalflow command line: run a configured experiment, run the built-in
// verification suites, or write fixtures.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modalflow/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Modal-interpretation dynamics: Bell jumps, Naimark lifting and Bohmian flows."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(MODALFLOW_VERSION));

    std::string config;
    std::vector<std::string> overrides;
    auto* run = app.add_subcommand("run", "Run the experiment described by a TOML config");
    run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
    run->add_option("--set", overrides, "Override a config entry, key=value (repeatable)");

    std::uint64_t seed = 2026;
    std::string fixture;
    auto* verify = app.add_subcommand("verify", "Run the module invariant suites");
    verify->add_option("--seed", seed, "Seed for the randomized checks");
    verify->add_option("--trine-fixture", fixture, "Load the trine extension from this JSON fixture")
        ->check(CLI::ExistingFile);

    std::string fixture_kind, fixture_path;
    auto* fx = app.add_subcommand("fixture", "Write a fixture file");
    fx->add_option("kind", fixture_kind, "Fixture kind")->required()->check(CLI::IsMember({"trine"}));
    fx->add_option("path", fixture_path, "Output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : modalflow::kExitConfig;
    }

    if (*run) return modalflow::run_command(config, overrides, std::cout, std::cerr);

    if (*verify) {
        modalflow::VerifyOptions opt;
        opt.seed = seed;
        if (!fixture.empty()) opt.trine_fixture = fixture;
        const auto suites = modalflow::verify_all(opt);
        std::cout << modalflow::format_verify_report(suites);
        for (const auto& s : suites)
            if (!s.passed()) return modalflow::kExitFailedChecks;
        return modalflow::kExitOk;
    }

    try {
        modalflow::write_trine_fixture(fixture_path);
    } catch (const std::exception& e) {
        std::cerr << "modalflow: " << e.what() << "\n";
        return modalflow::kExitNumeric;
    }
    std::cout << "wrote " << fixture_path << "\n";
    return modalflow::kExitOk;
}
