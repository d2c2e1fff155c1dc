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

// JSON form of complex matrices: an array of rows, each row an array of
// [re, im] pairs.

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "modalflow/hilbert.hpp"

namespace modalflow {

using json = nlohmann::json;

json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const json& j);

json vector_to_json(const CVector& v);
CVector vector_from_json(const json& j);

/// Shortest decimal string that parses back to the same double.
std::string format_number(double v);

}  // namespace modalflow
