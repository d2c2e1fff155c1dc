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

// Run configuration: a TOML file with `experiment`, `seed`, `output_dir` and
// a [parameters] table, plus `key=value` overrides from the command line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "modalflow/errors.hpp"
#include "modalflow/hilbert.hpp"
#include "modalflow/serialization.hpp"

namespace modalflow {

class ConfigError : public Error {
   public:
    using Error::Error;
};

struct RunConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = ".";
    /// Parameter table as parsed (TOML scalars and arrays as JSON).
    json parameters = json::object();
    std::string source;

    json to_json() const;
};

const std::vector<std::string>& known_experiments();

/// Parses TOML text. Overrides are `key=value` with a TOML value; bare keys
/// address [parameters], and `seed`, `experiment`, `output_dir` the top level.
RunConfig parse_config(const std::string& text, const std::string& source_name,
                       const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// output_dir as far as it can be read from a config that may not load;
/// "." when absent.
std::filesystem::path output_dir_hint(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Typed access to the parameter table. Every lookup, and every default
/// applied, is recorded in resolved() for the run manifest.
class Parameters {
   public:
    explicit Parameters(json table) : table_(std::move(table)) {}

    double number(const std::string& key, double fallback);
    double number(const std::string& key);
    long integer(const std::string& key, long fallback);
    long integer(const std::string& key);
    std::string text(const std::string& key, const std::string& fallback);
    bool flag(const std::string& key, bool fallback);
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
    std::vector<long> integers(const std::string& key, const std::vector<long>& fallback);
    /// A complex number given as [re, im] or a real scalar.
    cplx complex(const std::string& key, cplx fallback);

    bool has(const std::string& key) const { return table_.contains(key); }
    /// Throws ConfigError naming parameters never looked up.
    void reject_unused() const;
    const json& resolved() const { return resolved_; }

   private:
    const json* lookup(const std::string& key) const;
    json table_;
    json resolved_ = json::object();
    std::set<std::string> used_;
};

}  // namespace modalflow
