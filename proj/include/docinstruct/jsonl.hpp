// Copyright 2026 The docinstruct Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace docinstruct {

using Json = nlohmann::ordered_json;

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct JsonlLine {
  std::size_t line = 0;  // 1-based
  Json value;
};

// Parses every non-blank line. Malformed lines are reported and skipped.
std::vector<JsonlLine> parse_jsonl(const std::string& content,
                                   std::vector<LineError>& errors);
std::vector<JsonlLine> read_jsonl(const std::filesystem::path& path,
                                  std::vector<LineError>& errors);
// Like read_jsonl but any malformed line is an IoError.
std::vector<Json> read_jsonl_strict(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<Json>& rows);
void write_jsonl_atomic(const std::filesystem::path& path,
                        const std::vector<Json>& rows);

}  // namespace docinstruct
