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

#include "modalflow/serialization.hpp"

#include <charconv>
#include <cmath>

namespace modalflow {

namespace {

cplx entry_from_json(const json& e) {
    if (e.is_number()) return {e.get<double>(), 0.0};
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw DimensionError("matrix JSON: entries must be [re, im] pairs");
    return {e[0].get<double>(), e[1].get<double>()};
}

}  // namespace

json matrix_to_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw DimensionError("matrix JSON: expected a non-empty array of rows");
    const size_t cols = j[0].is_array() ? j[0].size() : 0;
    CMatrix m(j.size(), cols);
    for (size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw DimensionError("matrix JSON: ragged rows");
        for (size_t c = 0; c < cols; ++c) m(r, c) = entry_from_json(j[r][c]);
    }
    return m;
}

json vector_to_json(const CVector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v[i].real(), v[i].imag()});
    return out;
}

CVector vector_from_json(const json& j) {
    if (!j.is_array()) throw DimensionError("vector JSON: expected an array");
    CVector v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = entry_from_json(j[i]);
    return v;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace modalflow
