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

#include "modalflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace modalflow {

namespace {

json to_json_value(const toml::node& node, const std::string& field) {
    if (auto v = node.as_integer()) return v->get();
    if (auto v = node.as_floating_point()) return v->get();
    if (auto v = node.as_boolean()) return v->get();
    if (auto v = node.as_string()) return v->get();
    if (auto arr = node.as_array()) {
        json out = json::array();
        for (const auto& item : *arr) out.push_back(to_json_value(item, field));
        return out;
    }
    if (auto tbl = node.as_table()) {
        json out = json::object();
        for (const auto& [k, v] : *tbl) out[std::string(k.str())] = to_json_value(v, field + "." + std::string(k.str()));
        return out;
    }
    const auto& src = node.source();
    throw ConfigError(field + " (line " + std::to_string(src.begin.line) + "): unsupported value type");
}

std::string location(const toml::node& node) {
    std::ostringstream s;
    s << "line " << node.source().begin.line;
    return s.str();
}

void apply_override(RunConfig& cfg, const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + item + ": expected key=value");
    std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    json value;
    try {
        const toml::table t = toml::parse("v = " + raw);
        value = to_json_value(*t.get("v"), key);
    } catch (const toml::parse_error&) {
        value = raw;  // bare words are strings
    }
    if (key == "experiment" || key == "output_dir") {
        if (!value.is_string()) throw ConfigError("--set " + key + ": expected a string");
        if (key == "experiment")
            cfg.experiment = value.get<std::string>();
        else
            cfg.output_dir = value.get<std::string>();
        return;
    }
    if (key == "seed") {
        if (!value.is_number_integer() || value.get<long long>() < 0)
            throw ConfigError("--set seed: expected a non-negative integer");
        cfg.seed = value.get<std::uint64_t>();
        return;
    }
    if (key.rfind("parameters.", 0) == 0) key = key.substr(11);
    if (key.empty()) throw ConfigError("--set " + item + ": empty parameter name");
    cfg.parameters[key] = value;
}

}  // namespace

const std::vector<std::string>& known_experiments() {
    static const std::vector<std::string> names = {"trine_static",      "jump_generic",    "bohm_trajectory",
                                                   "continuum_sweep",   "husimi_oscillator", "bohm_oscillator",
                                                   "classical_limit",   "verify_all"};
    return names;
}

json RunConfig::to_json() const {
    return {{"experiment", experiment},
            {"seed", seed},
            {"output_dir", output_dir.string()},
            {"parameters", parameters},
            {"source", source}};
}

RunConfig parse_config(const std::string& text, const std::string& source_name,
                       const std::vector<std::string>& overrides) {
    toml::table root;
    try {
        root = toml::parse(text, source_name);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
            << e.description();
        throw ConfigError(msg.str());
    }

    RunConfig cfg;
    cfg.source = source_name;
    bool have_seed = false;
    for (const auto& [k, node] : root) {
        const std::string key(k.str());
        if (key == "experiment") {
            auto v = node.value<std::string>();
            if (!v) throw ConfigError(source_name + ": experiment (" + location(node) + "): expected a string");
            cfg.experiment = *v;
        } else if (key == "seed") {
            auto v = node.as_integer();
            if (!v || v->get() < 0)
                throw ConfigError(source_name + ": seed (" + location(node) + "): expected a non-negative integer");
            cfg.seed = static_cast<std::uint64_t>(v->get());
            have_seed = true;
        } else if (key == "output_dir") {
            auto v = node.value<std::string>();
            if (!v) throw ConfigError(source_name + ": output_dir (" + location(node) + "): expected a string");
            cfg.output_dir = *v;
        } else if (key == "parameters") {
            if (!node.is_table())
                throw ConfigError(source_name + ": parameters (" + location(node) + "): expected a table");
            cfg.parameters = to_json_value(node, "parameters");
        } else {
            throw ConfigError(source_name + ": " + key + " (" + location(node) + "): unknown top-level key");
        }
    }
    for (const auto& o : overrides) {
        if (o.rfind("seed=", 0) == 0) have_seed = true;
        apply_override(cfg, o);
    }
    if (cfg.experiment.empty()) throw ConfigError(source_name + ": experiment: missing");
    const auto& names = known_experiments();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
        throw ConfigError(source_name + ": experiment: unknown experiment '" + cfg.experiment + "'");
    if (!have_seed) throw ConfigError(source_name + ": seed: missing (a seed is mandatory)");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string(), overrides);
}

std::filesystem::path output_dir_hint(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::filesystem::path dir = ".";
    try {
        const toml::table root = toml::parse_file(path.string());
        if (auto v = root["output_dir"].value<std::string>()) dir = *v;
    } catch (const std::exception&) {
    }
    for (const auto& o : overrides) {
        if (o.rfind("output_dir=", 0) != 0) continue;
        try {
            const toml::table t = toml::parse("v = " + o.substr(11));
            if (auto v = t["v"].value<std::string>()) dir = *v;
        } catch (const std::exception&) {
        }
    }
    return dir;
}

// ---------------------------------------------------------------------------

const json* Parameters::lookup(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &*it;
}

double Parameters::number(const std::string& key, double fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = fallback;
        return fallback;
    }
    if (!v->is_number()) throw ConfigError("parameters." + key + ": expected a number");
    resolved_[key] = *v;
    return v->get<double>();
}

double Parameters::number(const std::string& key) {
    if (!lookup(key)) throw ConfigError("parameters." + key + ": missing required parameter");
    return number(key, 0.0);
}

long Parameters::integer(const std::string& key, long fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = fallback;
        return fallback;
    }
    // Accept integral floats such as 1e5.
    if (v->is_number_float()) {
        const double d = v->get<double>();
        if (std::floor(d) != d || std::abs(d) > 9e15) throw ConfigError("parameters." + key + ": expected an integer");
        resolved_[key] = static_cast<long>(d);
        return static_cast<long>(d);
    }
    if (!v->is_number_integer()) throw ConfigError("parameters." + key + ": expected an integer");
    resolved_[key] = *v;
    return v->get<long>();
}

long Parameters::integer(const std::string& key) {
    if (!lookup(key)) throw ConfigError("parameters." + key + ": missing required parameter");
    return integer(key, 0);
}

std::string Parameters::text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = fallback;
        return fallback;
    }
    if (!v->is_string()) throw ConfigError("parameters." + key + ": expected a string");
    resolved_[key] = *v;
    return v->get<std::string>();
}

bool Parameters::flag(const std::string& key, bool fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = fallback;
        return fallback;
    }
    if (!v->is_boolean()) throw ConfigError("parameters." + key + ": expected true or false");
    resolved_[key] = *v;
    return v->get<bool>();
}

std::vector<double> Parameters::numbers(const std::string& key, const std::vector<double>& fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = fallback;
        return fallback;
    }
    std::vector<double> out;
    if (v->is_number()) {
        out.push_back(v->get<double>());
    } else if (v->is_array()) {
        for (const auto& item : *v) {
            if (!item.is_number()) throw ConfigError("parameters." + key + ": expected an array of numbers");
            out.push_back(item.get<double>());
        }
    } else {
        throw ConfigError("parameters." + key + ": expected an array of numbers");
    }
    resolved_[key] = out;
    return out;
}

std::vector<long> Parameters::integers(const std::string& key, const std::vector<long>& fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = fallback;
        return fallback;
    }
    std::vector<long> out;
    auto take = [&](const json& item) {
        if (!item.is_number_integer()) throw ConfigError("parameters." + key + ": expected integers");
        out.push_back(item.get<long>());
    };
    if (v->is_array())
        for (const auto& item : *v) take(item);
    else
        take(*v);
    resolved_[key] = out;
    return out;
}

cplx Parameters::complex(const std::string& key, cplx fallback) {
    used_.insert(key);
    const json* v = lookup(key);
    if (!v) {
        resolved_[key] = {fallback.real(), fallback.imag()};
        return fallback;
    }
    cplx out;
    if (v->is_number()) {
        out = v->get<double>();
    } else if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
        out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    } else {
        throw ConfigError("parameters." + key + ": expected a number or [re, im]");
    }
    resolved_[key] = {out.real(), out.imag()};
    return out;
}

void Parameters::reject_unused() const {
    std::vector<std::string> unused;
    for (const auto& [k, v] : table_.items())
        if (!used_.count(k)) unused.push_back(k);
    if (unused.empty()) return;
    std::string msg = "unknown parameter";
    msg += unused.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unused.size(); ++i) msg += (i ? ", parameters." : "parameters.") + unused[i];
    throw ConfigError(msg);
}

}  // namespace modalflow
