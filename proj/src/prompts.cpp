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

#include "docinstruct/prompts.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "docinstruct/common.hpp"
#include "docinstruct/jsonl.hpp"

namespace docinstruct {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<TemplateId, std::string_view>, 13> kNames = {{
    {TemplateId::kPrescreenUseless, "prescreen_useless"},
    {TemplateId::kPrescreenPrivacy, "prescreen_privacy"},
    {TemplateId::kPrescreenAd, "prescreen_ad"},
    {TemplateId::kInstrFilterTemporal, "instr_filter_temporal"},
    {TemplateId::kInstrFilterPrivacy, "instr_filter_privacy"},
    {TemplateId::kInstrFilterLogic, "instr_filter_logic"},
    {TemplateId::kSeedQuestion, "seed_question"},
    {TemplateId::kThinkDifferent, "think_different"},
    {TemplateId::kQToA, "q_to_a"},
    {TemplateId::kQDocToA, "qdoc_to_a"},
    {TemplateId::kFaithfulnessEval, "faithfulness_eval"},
    {TemplateId::kQualityScorer, "quality_scorer"},
    {TemplateId::kComplexityScorer, "complexity_scorer"},
}};

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls on_token(name, begin, end) for every {identifier} in body.
template <class Fn>
void scan_tokens(const std::string& body, Fn&& on_token) {
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '{') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < body.size() && is_ident_char(body[j])) ++j;
    if (j < body.size() && body[j] == '}' && j > i + 1) {
      on_token(body.substr(i + 1, j - i - 1), i, j + 1);
      i = j + 1;
    } else {
      ++i;
    }
  }
}

std::vector<Tag> load_tags(const Json& arr, std::size_t expected,
                           const std::string& group) {
  std::vector<Tag> out;
  for (const auto& t : arr) {
    out.push_back({t.at("name").get<std::string>(), t.at("text").get<std::string>()});
  }
  if (out.size() != expected) {
    throw ConfigError("tag group " + group + " must hold " +
                      std::to_string(expected) + " tags, found " +
                      std::to_string(out.size()));
  }
  return out;
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [tid, name] : kNames) {
    if (tid == id) return name;
  }
  return "unknown";
}

std::optional<TemplateId> template_id_from_string(std::string_view name) {
  for (const auto& [tid, n] : kNames) {
    if (n == name) return tid;
  }
  return std::nullopt;
}

PromptForge PromptForge::load(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  Json manifest;
  try {
    manifest = Json::parse(read_file(manifest_path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed " + manifest_path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(std::string("template manifest: ") + e.what());
  }

  PromptForge forge;
  const auto& entries = manifest.at("templates");
  for (auto it = entries.begin(); it != entries.end(); ++it) {
    auto id = template_id_from_string(it.key());
    if (!id) throw ConfigError("unknown template id in manifest: " + it.key());
    PromptTemplate t;
    t.id = *id;
    t.body = read_file(dir / it.value().at("file").get<std::string>());
    t.placeholders = it.value().at("placeholders").get<std::vector<std::string>>();
    std::sort(t.placeholders.begin(), t.placeholders.end());
    if (auto g = it.value().find("good_verdict"); g != it.value().end()) {
      t.good_verdict = g->get<int>();
    }
    std::set<std::string> found;
    scan_tokens(t.body, [&](const std::string& name, std::size_t, std::size_t) {
      found.insert(name);
    });
    if (!std::equal(found.begin(), found.end(), t.placeholders.begin(),
                    t.placeholders.end())) {
      throw ConfigError("placeholder list for " + it.key() +
                        " does not match its template body");
    }
    forge.templates_[t.id] = std::move(t);
  }
  for (TemplateId id : kAllTemplates) {
    if (!forge.templates_.count(id)) {
      throw ConfigError("manifest is missing template " + std::string(to_string(id)));
    }
  }
  const auto& tags = manifest.at("tags");
  forge.tags_.difficulty = load_tags(tags.at("difficulty"), 4, "difficulty");
  forge.tags_.task_type = load_tags(tags.at("task_type"), 10, "task_type");
  forge.tags_.style = load_tags(tags.at("style"), 2, "style");
  return forge;
}

PromptForge PromptForge::load_default() {
  if (const char* env = std::getenv("DOCINSTRUCT_TEMPLATES"); env && *env) {
    return load(env);
  }
  return load(DOCINSTRUCT_TEMPLATE_DIR);
}

const PromptTemplate& PromptForge::get(TemplateId id) const {
  return templates_.at(id);
}

int PromptForge::good_verdict(TemplateId id) const {
  const auto& t = get(id);
  if (!t.good_verdict) {
    throw PreconditionError(std::string(to_string(id)) + " is not a binary judge template");
  }
  return *t.good_verdict;
}

RenderedPrompt PromptForge::render(TemplateId id, const Bindings& bindings) const {
  const PromptTemplate& t = get(id);
  for (const auto& p : t.placeholders) {
    if (!bindings.count(p)) {
      throw PreconditionError(std::string(to_string(id)) + ": missing binding {" + p + "}");
    }
  }
  for (const auto& [k, v] : bindings) {
    if (!std::binary_search(t.placeholders.begin(), t.placeholders.end(), k)) {
      throw PreconditionError(std::string(to_string(id)) + ": unexpected binding {" + k + "}");
    }
  }
  RenderedPrompt out{id, {}, bindings};
  out.text.reserve(t.body.size());
  std::size_t cursor = 0;
  scan_tokens(t.body, [&](const std::string& name, std::size_t b, std::size_t e) {
    out.text.append(t.body, cursor, b - cursor);
    out.text += bindings.at(name);
    cursor = e;
  });
  out.text.append(t.body, cursor, std::string::npos);
  return out;
}

std::vector<GridPrompt> PromptForge::seed_prompt_grid(const Document& doc) const {
  if (doc.text.empty()) throw PreconditionError("seed_prompt_grid: empty document");
  std::vector<GridPrompt> grid;
  grid.reserve(tags_.difficulty.size() * tags_.task_type.size() * tags_.style.size());
  for (const auto& difficulty : tags_.difficulty) {
    for (const auto& task : tags_.task_type) {
      for (const auto& style : tags_.style) {
        Bindings b{{"characteristic", difficulty.text},
                   {"type", style.text},
                   {"classify", task.text},
                   {"text", doc.text}};
        grid.push_back({render(TemplateId::kSeedQuestion, b),
                        {difficulty.name, task.name, style.name}});
      }
    }
  }
  return grid;
}

RenderedPrompt PromptForge::think_different_prompt(
    const Document& doc, std::span<const std::string> exemplars,
    const std::string& command) const {
  if (exemplars.size() != 5) {
    throw PreconditionError("think_different_prompt needs exactly 5 exemplars, got " +
                            std::to_string(exemplars.size()));
  }
  Bindings b{{"command", command}, {"text", doc.text}};
  for (std::size_t i = 0; i < 5; ++i) {
    b["seed" + std::to_string(i + 1)] = exemplars[i];
  }
  return render(TemplateId::kThinkDifferent, b);
}

}  // namespace docinstruct
