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

#include "docinstruct/seeds.hpp"

#include <cctype>
#include <exception>
#include <numeric>
#include <unordered_set>

namespace docinstruct {

Instruction make_instruction(std::string text, std::string origin_doc_id,
                             std::optional<TagTriple> tags, int iteration) {
  Instruction in;
  in.instr_id = content_id(text);
  in.word_count = word_count(text);
  in.text = std::move(text);
  in.origin_doc_id = std::move(origin_doc_id);
  in.tags = std::move(tags);
  in.iteration = iteration;
  return in;
}

Json to_json(const Instruction& instr) {
  Json j;
  j["instr_id"] = instr.instr_id;
  j["text"] = instr.text;
  j["origin_doc_id"] = instr.origin_doc_id;
  if (instr.tags) {
    j["tags"] = Json{{"difficulty", instr.tags->difficulty},
                     {"task_type", instr.tags->task_type},
                     {"style", instr.tags->style}};
  } else {
    j["tags"] = nullptr;
  }
  j["iteration"] = instr.iteration;
  j["word_count"] = instr.word_count;
  return j;
}

Instruction instruction_from_json(const Json& j) {
  std::optional<TagTriple> tags;
  if (auto it = j.find("tags"); it != j.end() && it->is_object()) {
    tags = TagTriple{it->at("difficulty").get<std::string>(),
                     it->at("task_type").get<std::string>(),
                     it->at("style").get<std::string>()};
  }
  Instruction in = make_instruction(j.at("text").get<std::string>(),
                                    j.value("origin_doc_id", std::string{}), tags,
                                    j.value("iteration", 0));
  if (auto id = j.find("instr_id"); id != j.end() && id->get<std::string>() != in.instr_id) {
    throw IoError("instr_id does not match text for " + id->get<std::string>());
  }
  return in;
}

std::string parse_instruction_reply(const std::string& reply) {
  std::string_view s = trim(reply);
  for (std::string_view marker : {"### Question:", "Question:"}) {
    if (s.size() >= marker.size()) {
      bool match = true;
      for (std::size_t i = 0; i < marker.size() && match; ++i) {
        match = std::tolower(static_cast<unsigned char>(s[i])) ==
                std::tolower(static_cast<unsigned char>(marker[i]));
      }
      if (match) {
        s = trim(s.substr(marker.size()));
        break;
      }
    }
  }
  return std::string(s);
}

Json to_json(const FilterOutcome& o) {
  Json j;
  j["subject_id"] = o.subject_id;
  j["filter_id"] = std::string(to_string(o.filter_id));
  if (o.verdict) {
    j["verdict"] = *o.verdict;
  } else {
    j["verdict"] = nullptr;
    j["unparseable"] = true;
  }
  j["raw_reply"] = o.raw_reply;
  return j;
}

bool StageAccounting::balanced() const {
  std::size_t dropped = 0;
  for (const auto& [k, v] : drops) dropped += v;
  return input == output + dropped;
}

Json StageAccounting::to_json() const {
  Json j;
  j["input"] = input;
  j["output"] = output;
  j["drops"] = Json::object();
  for (const auto& [k, v] : drops) j["drops"][k] = v;
  return j;
}

SeedGenerator::SeedGenerator(Gateway& gateway, const PromptForge& forge,
                             SeedOptions options)
    : gateway_(gateway), forge_(forge), options_(std::move(options)) {
  for (TemplateId id : options_.prescreen_filters) (void)forge_.good_verdict(id);
  for (TemplateId id : options_.instruction_filters) (void)forge_.good_verdict(id);
}

namespace {

// Renders a single-placeholder judge template around `subject`.
RenderedPrompt render_judge(const PromptForge& forge, TemplateId id,
                            const std::string& subject) {
  const auto& t = forge.get(id);
  if (t.placeholders.size() != 1) {
    throw PreconditionError(std::string(to_string(id)) +
                            " is not a single-slot judge template");
  }
  return forge.render(id, {{t.placeholders.front(), subject}});
}

struct ItemResult {
  std::vector<FilterOutcome> outcomes;
  std::string drop_reason;  // empty: kept
  std::exception_ptr error;
};

}  // namespace

std::vector<Document> SeedGenerator::prescreen_documents(std::span<const Document> docs) {
  std::vector<ItemResult> results(docs.size());
  parallel_for(docs.size(), options_.workers, [&](std::size_t i) {
    try {
      for (TemplateId f : options_.prescreen_filters) {
        const auto prompt = render_judge(forge_, f, docs[i].text);
        FilterOutcome o{docs[i].doc_id, f, std::nullopt, {}};
        try {
          auto v = gateway_.binary_judge(prompt.text, std::string(to_string(f)));
          o.verdict = v.value;
          o.raw_reply = v.raw_text;
        } catch (const VerdictParseError& e) {
          o.raw_reply = e.raw_text();
          results[i].outcomes.push_back(std::move(o));
          results[i].drop_reason = "unparseable_verdict";
          return;
        }
        const bool good = *o.verdict == forge_.good_verdict(f);
        results[i].outcomes.push_back(std::move(o));
        if (!good) {
          results[i].drop_reason = std::string(to_string(f));
          return;
        }
      }
    } catch (...) {
      results[i].error = std::current_exception();
    }
  });

  for (auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
  }
  std::vector<Document> kept;
  prescreen_acc_.input += docs.size();
  std::lock_guard lock(audit_mu_);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (auto& o : results[i].outcomes) audit_.push_back(std::move(o));
    if (results[i].drop_reason.empty()) {
      kept.push_back(docs[i]);
    } else {
      prescreen_acc_.drop(results[i].drop_reason);
    }
  }
  prescreen_acc_.output += kept.size();
  return kept;
}

FilterDecision SeedGenerator::check_instruction(const Instruction& instr,
                                                std::vector<FilterOutcome>& outcomes) {
  if (instr.text.empty()) throw PreconditionError("filter_instruction: empty text");
  for (TemplateId f : options_.instruction_filters) {
    const auto prompt = render_judge(forge_, f, instr.text);
    FilterOutcome o{instr.instr_id, f, std::nullopt, {}};
    try {
      auto v = gateway_.binary_judge(prompt.text, std::string(to_string(f)));
      o.verdict = v.value;
      o.raw_reply = v.raw_text;
    } catch (const VerdictParseError& e) {
      o.raw_reply = e.raw_text();
      outcomes.push_back(std::move(o));
      return {false, "unparseable_verdict"};
    } catch (const GatewayError& e) {
      o.raw_reply = e.what();
      outcomes.push_back(std::move(o));
      return {false, "gateway_error"};
    }
    const bool good = *o.verdict == forge_.good_verdict(f);
    outcomes.push_back(std::move(o));
    if (!good) return {false, std::string(to_string(f))};
  }
  return {true, {}};
}

bool SeedGenerator::filter_instruction(const Instruction& instr) {
  std::vector<FilterOutcome> outcomes;
  const auto decision = check_instruction(instr, outcomes);
  std::lock_guard lock(audit_mu_);
  for (auto& o : outcomes) audit_.push_back(std::move(o));
  return decision.keep;
}

std::vector<Instruction> SeedGenerator::generate_seeds(std::span<const Document> docs,
                                                       std::size_t sample_size,
                                                       std::uint64_t rng_seed) {
  if (docs.empty()) throw PreconditionError("generate_seeds: no documents");
  if (sample_size > docs.size()) {
    throw PreconditionError("generate_seeds: sample_size " + std::to_string(sample_size) +
                            " exceeds " + std::to_string(docs.size()) + " documents");
  }
  Rng rng(rng_seed);
  const auto sample = rng.sample_without_replacement(docs.size(), sample_size);

  struct Task {
    std::size_t doc;
    GridPrompt cell;
  };
  std::vector<Task> tasks;
  for (std::size_t d : sample) {
    for (auto& cell : forge_.seed_prompt_grid(docs[d])) tasks.push_back({d, std::move(cell)});
  }

  struct TaskResult {
    std::optional<Instruction> instr;
    std::vector<FilterOutcome> outcomes;
    std::string drop_reason;
  };
  std::vector<TaskResult> results(tasks.size());
  parallel_for(tasks.size(), options_.workers, [&](std::size_t i) {
    auto& r = results[i];
    const auto& task = tasks[i];
    std::string reply;
    try {
      reply = gateway_.chat(gateway_.generation_request(
          task.cell.prompt.text, std::string(to_string(TemplateId::kSeedQuestion))));
    } catch (const GatewayError&) {
      r.drop_reason = "gateway_error";
      return;
    }
    std::string text = parse_instruction_reply(reply);
    if (text.empty()) {
      r.drop_reason = "empty_reply";
      return;
    }
    Instruction instr = make_instruction(std::move(text), docs[task.doc].doc_id,
                                         task.cell.tags, 0);
    try {
      auto decision = check_instruction(instr, r.outcomes);
      if (decision.keep) {
        r.instr = std::move(instr);
      } else {
        r.drop_reason = decision.reason;
      }
    } catch (const std::exception& e) {
      r.drop_reason = "filter_error";
    }
  });

  std::vector<Instruction> pool;
  std::unordered_set<std::string> ids;
  seed_acc_.input += tasks.size();
  std::lock_guard lock(audit_mu_);
  for (auto& r : results) {
    for (auto& o : r.outcomes) audit_.push_back(std::move(o));
    if (!r.instr) {
      seed_acc_.drop(r.drop_reason);
    } else if (!ids.insert(r.instr->instr_id).second) {
      seed_acc_.drop("duplicate");
    } else {
      pool.push_back(std::move(*r.instr));
    }
  }
  seed_acc_.output += pool.size();
  return pool;
}

std::vector<FilterOutcome> SeedGenerator::take_audit() {
  std::lock_guard lock(audit_mu_);
  return std::exchange(audit_, {});
}

}  // namespace docinstruct
