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

#include "modalflow/csv.hpp"

#include <fstream>

#include "modalflow/errors.hpp"
#include "modalflow/serialization.hpp"

namespace modalflow {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void CsvTable::Row::cell(std::string_view text) {
    if (cells_++) line_ += ',';
    line_ += text;
}

CsvTable::Row& CsvTable::Row::operator<<(double v) {
    cell(format_number(v));
    return *this;
}

CsvTable::Row& CsvTable::Row::operator<<(int v) {
    cell(std::to_string(v));
    return *this;
}

CsvTable::Row& CsvTable::Row::operator<<(long v) {
    cell(std::to_string(v));
    return *this;
}

CsvTable::Row& CsvTable::Row::operator<<(const std::string& v) {
    cell(v);
    return *this;
}

CsvTable::Row::~Row() {
    // A short row is a programming error; pad so the table stays rectangular.
    while (cells_ < table_.columns_) cell("");
    table_.text_ += line_;
    table_.text_ += '\n';
    ++table_.rows_;
}

}  // namespace modalflow
