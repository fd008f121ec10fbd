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

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docinstruct/corpus.hpp"

namespace docinstruct {

enum class TemplateId {
  kPrescreenUseless,
  kPrescreenPrivacy,
  kPrescreenAd,
  kInstrFilterTemporal,
  kInstrFilterPrivacy,
  kInstrFilterLogic,
  kSeedQuestion,
  kThinkDifferent,
  kQToA,
  kQDocToA,
  kFaithfulnessEval,
  kQualityScorer,
  kComplexityScorer,
};

inline constexpr std::array<TemplateId, 13> kAllTemplates = {
    TemplateId::kPrescreenUseless,   TemplateId::kPrescreenPrivacy,
    TemplateId::kPrescreenAd,        TemplateId::kInstrFilterTemporal,
    TemplateId::kInstrFilterPrivacy, TemplateId::kInstrFilterLogic,
    TemplateId::kSeedQuestion,       TemplateId::kThinkDifferent,
    TemplateId::kQToA,               TemplateId::kQDocToA,
    TemplateId::kFaithfulnessEval,   TemplateId::kQualityScorer,
    TemplateId::kComplexityScorer,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> template_id_from_string(std::string_view name);

using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
  TemplateId id{};
  std::string body;
  std::vector<std::string> placeholders;  // sorted
  // For binary judge templates: the verdict that means "acceptable".
  std::optional<int> good_verdict;
};

struct RenderedPrompt {
  TemplateId template_id{};
  std::string text;
  Bindings bindings;
};

struct Tag {
  std::string name;
  std::string text;
};

struct TagPool {
  std::vector<Tag> difficulty;  // 4
  std::vector<Tag> task_type;   // 10
  std::vector<Tag> style;       // 2
};

struct TagTriple {
  std::string difficulty;
  std::string task_type;
  std::string style;

  bool operator==(const TagTriple&) const = default;
};

struct GridPrompt {
  RenderedPrompt prompt;
  TagTriple tags;
};

// Immutable template registry loaded from an asset directory holding one
// text file per template plus manifest.json.
class PromptForge {
 public:
  static PromptForge load(const std::filesystem::path& dir);
  // Assets from the source tree, or $DOCINSTRUCT_TEMPLATES when set.
  static PromptForge load_default();

  const PromptTemplate& get(TemplateId id) const;
  const TagPool& tags() const { return tags_; }

  // Plain substitution of {name} tokens. Bindings must cover exactly the
  // template's placeholders; substituted values are never re-scanned.
  RenderedPrompt render(TemplateId id, const Bindings& bindings) const;

  // 4 x 10 x 2 prompts: difficulty outermost, then task type, then style.
  std::vector<GridPrompt> seed_prompt_grid(const Document& doc) const;

  // Exactly five exemplars, bound to <Example1>..<Example5> in order.
  RenderedPrompt think_different_prompt(const Document& doc,
                                        std::span<const std::string> exemplars,
                                        const std::string& command = "") const;

  // Verdict that keeps an item for a binary judge template.
  int good_verdict(TemplateId id) const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
  TagPool tags_;
};

}  // namespace docinstruct
