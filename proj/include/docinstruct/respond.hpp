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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docinstruct/seeds.hpp"

namespace docinstruct {

enum class ResponseMode { kDirect, kCautious, kFaithful, kAdaptive };

std::string_view to_string(ResponseMode mode);
std::optional<ResponseMode> response_mode_from_string(std::string_view name);
bool uses_context(ResponseMode mode);

// Extra prompt lines for the cautious and faithful settings.
inline constexpr std::string_view kCautiousLine =
    "If you don't know the answer, say you don't know.";
inline constexpr std::string_view kFaithfulLine =
    "Answer only with information contained in the paragraph.";

struct RetrievalIndex {
  std::vector<std::string> doc_ids;         // unique
  std::vector<EmbeddingVector> vectors;     // normalized, aligned with doc_ids
  std::size_t dim = 0;
  std::size_t omitted = 0;                  // docs whose embedding failed

  std::size_t size() const { return doc_ids.size(); }
};

struct Retrieved {
  std::string doc_id;
  double score = 0.0;
};

struct ResponseCandidate {
  std::string instr_id;
  ResponseMode mode = ResponseMode::kDirect;
  std::string text;
  std::vector<std::string> context_doc_ids;
  std::optional<int> judge_score;
  std::string prompt;  // exact text sent to the generator
};

struct DatasetRecord {
  std::string instr_id;
  std::string instruction;
  std::string input;  // empty by default
  std::string output;
  Json meta = Json::object();
};

Json to_json(const DatasetRecord& r);

// JSONL sorted by instr_id; fields instruction, input, output, meta.
void emit_dataset(std::vector<DatasetRecord> records, const std::filesystem::path& path);
std::string render_dataset(std::vector<DatasetRecord> records);

// Mode priority on equal judge scores: direct, cautious, adaptive, faithful.
int tie_rank(ResponseMode mode);

struct ResponseOptions {
  std::size_t top_m = 1;
  std::vector<ResponseMode> modes = {ResponseMode::kDirect, ResponseMode::kAdaptive};
  bool include_origin_doc = true;
  std::size_t workers = 8;
};

struct ResponseLogEntry {
  std::string instr_id;
  ResponseMode mode{};
  std::vector<std::string> context_doc_ids;
  std::string prompt_hash;
  std::optional<int> judge_score;
  bool winner = false;
};
Json to_json(const ResponseLogEntry& e);

class ResponseSynthesizer {
 public:
  ResponseSynthesizer(Gateway& gateway, const PromptForge& forge,
                      ResponseOptions options = {});

  RetrievalIndex build_index(std::span<const Document> docs);

  // Top-m documents by cosine similarity, descending; ties by doc_id.
  std::vector<Retrieved> retrieve(const RetrievalIndex& index, const Instruction& instr,
                                  std::size_t top_m);

  std::string build_prompt(const Instruction& instr, ResponseMode mode,
                           std::span<const Document> context) const;

  ResponseCandidate generate_response(const Instruction& instr, ResponseMode mode,
                                      std::span<const Document> context);

  // Scores each candidate with the 5-point judge and returns the winner, or
  // nullopt when no candidate produced a parseable score.
  std::optional<ResponseCandidate> select_response(const Instruction& instr,
                                                   std::vector<ResponseCandidate>& candidates);

  // Whole stage: context assembly, candidate generation, judging, records.
  std::vector<DatasetRecord> synthesize(std::span<const Instruction> pool,
                                        std::span<const Document> docs,
                                        const RetrievalIndex& index);

  const StageAccounting& accounting() const { return accounting_; }
  std::vector<ResponseLogEntry> take_log() { return std::exchange(log_, {}); }

 private:
  Gateway& gateway_;
  const PromptForge& forge_;
  ResponseOptions options_;
  StageAccounting accounting_;
  std::vector<ResponseLogEntry> log_;
};

}  // namespace docinstruct
