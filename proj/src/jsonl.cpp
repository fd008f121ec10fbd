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

#include "docinstruct/jsonl.hpp"

#include "docinstruct/common.hpp"

namespace docinstruct {

std::vector<JsonlLine> parse_jsonl(const std::string& content,
                                   std::vector<LineError>& errors) {
  std::vector<JsonlLine> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    ++line_no;
    std::string_view line(content.data() + pos, eol - pos);
    pos = eol + 1;
    if (trim(line).empty()) continue;
    try {
      out.push_back({line_no, Json::parse(line)});
    } catch (const Json::parse_error& e) {
      errors.push_back({line_no, e.what()});
    }
  }
  return out;
}

std::vector<JsonlLine> read_jsonl(const std::filesystem::path& path,
                                  std::vector<LineError>& errors) {
  return parse_jsonl(read_file(path), errors);
}

std::vector<Json> read_jsonl_strict(const std::filesystem::path& path) {
  std::vector<LineError> errors;
  auto lines = read_jsonl(path, errors);
  if (!errors.empty()) {
    throw IoError(path.string() + ":" + std::to_string(errors[0].line) +
                  ": " + errors[0].message);
  }
  std::vector<Json> out;
  out.reserve(lines.size());
  for (auto& l : lines) out.push_back(std::move(l.value));
  return out;
}

std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump(-1, ' ', false, Json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

void write_jsonl_atomic(const std::filesystem::path& path,
                        const std::vector<Json>& rows) {
  write_file_atomic(path, to_jsonl(rows));
}

}  // namespace docinstruct
