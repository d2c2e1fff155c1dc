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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace modalflow {

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// CSV table buffered in memory. Numbers use the shortest round-trip form.
class CsvTable {
   public:
    explicit CsvTable(std::vector<std::string> header);

    class Row {
       public:
        Row& operator<<(double v);
        Row& operator<<(int v);
        Row& operator<<(long v);
        Row& operator<<(const std::string& v);
        Row& operator<<(const char* v) { return *this << std::string(v); }
        ~Row();

       private:
        friend class CsvTable;
        explicit Row(CsvTable& t) : table_(t) {}
        void cell(std::string_view text);
        CsvTable& table_;
        std::string line_;
        std::size_t cells_ = 0;
    };

    /// Cells streamed into the returned row; the row is committed when it
    /// goes out of scope.
    Row row() { return Row(*this); }

    std::size_t rows() const { return rows_; }
    const std::string& text() const { return text_; }
    void save(const std::filesystem::path& path) const { write_file_atomic(path, text_); }

   private:
    std::size_t columns_;
    std::size_t rows_ = 0;
    std::string text_;
};

}  // namespace modalflow
