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

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docinstruct/corpus.hpp"
#include "docinstruct/diversity.hpp"
#include "docinstruct/gateway.hpp"
#include "docinstruct/prompts.hpp"

namespace docinstruct {

struct Instruction {
  std::string instr_id;  // content_id(text)
  std::string text;
  std::string origin_doc_id;
  std::optional<TagTriple> tags;  // seeds only
  int iteration = 0;              // 0 = seed
  std::size_t word_count = 0;
  std::optional<EmbeddingVector> embedding;
};

Instruction make_instruction(std::string text, std::string origin_doc_id,
                             std::optional<TagTriple> tags, int iteration);
Json to_json(const Instruction& instr);
Instruction instruction_from_json(const Json& j);

// Trims the completion and strips a leading "### Question:" / "Question:"
// echo. Multi-line replies are kept intact.
std::string parse_instruction_reply(const std::string& reply);

struct FilterOutcome {
  std::string subject_id;  // doc_id or instr_id
  TemplateId filter_id{};
  std::optional<int> verdict;  // empty when the reply was unparseable
  std::string raw_reply;
};
Json to_json(const FilterOutcome& o);

// input == output + sum(drops) at every stage.
struct StageAccounting {
  std::size_t input = 0;
  std::size_t output = 0;
  std::map<std::string, std::size_t> drops;

  bool balanced() const;
  void drop(const std::string& reason, std::size_t n = 1) { drops[reason] += n; }
  Json to_json() const;
};

struct SeedOptions {
  std::vector<TemplateId> prescreen_filters = {TemplateId::kPrescreenUseless,
                                               TemplateId::kPrescreenPrivacy,
                                               TemplateId::kPrescreenAd};
  std::vector<TemplateId> instruction_filters = {TemplateId::kInstrFilterTemporal,
                                                 TemplateId::kInstrFilterPrivacy,
                                                 TemplateId::kInstrFilterLogic};
  std::size_t workers = 8;
};

struct FilterDecision {
  bool keep = false;
  std::string reason;  // drop reason when !keep
};

// LLM pre-screen of documents and seed-pool construction. Every judge call is
// recorded as a FilterOutcome, in deterministic (input, filter) order.
class SeedGenerator {
 public:
  SeedGenerator(Gateway& gateway, const PromptForge& forge, SeedOptions options = {});

  // Short-circuit cascade in prescreen_filters order; a document survives
  // when every verdict is the template's good verdict. Unparseable verdicts
  // drop the document. Gateway failures propagate.
  std::vector<Document> prescreen_documents(std::span<const Document> docs);

  // Conjunctive, short-circuit instruction filters; unparseable or failed
  // judge calls drop the instruction.
  bool filter_instruction(const Instruction& instr);
  FilterDecision check_instruction(const Instruction& instr,
                                   std::vector<FilterOutcome>& outcomes);

  std::vector<Instruction> generate_seeds(std::span<const Document> docs,
                                          std::size_t sample_size,
                                          std::uint64_t rng_seed);

  std::vector<FilterOutcome> take_audit();
  const StageAccounting& prescreen_accounting() const { return prescreen_acc_; }
  const StageAccounting& seed_accounting() const { return seed_acc_; }

 private:
  Gateway& gateway_;
  const PromptForge& forge_;
  SeedOptions options_;
  std::mutex audit_mu_;
  std::vector<FilterOutcome> audit_;
  StageAccounting prescreen_acc_;
  StageAccounting seed_acc_;
};

}  // namespace docinstruct
