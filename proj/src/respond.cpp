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

#include "docinstruct/respond.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace docinstruct {

namespace {

constexpr std::pair<ResponseMode, std::string_view> kModeNames[] = {
    {ResponseMode::kDirect, "direct"},
    {ResponseMode::kCautious, "cautious"},
    {ResponseMode::kFaithful, "faithful"},
    {ResponseMode::kAdaptive, "adaptive"},
};

// Inserts `line` as its own line right before the first line starting with
// `marker`.
std::string insert_line_before(std::string text, std::string_view marker,
                               std::string_view line) {
  std::size_t pos = text.find(std::string("\n").append(marker));
  pos = pos == std::string::npos ? 0 : pos + 1;
  text.insert(pos, std::string(line) + "\n");
  return text;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  return std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
}

}  // namespace

std::string_view to_string(ResponseMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::optional<ResponseMode> response_mode_from_string(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  return std::nullopt;
}

bool uses_context(ResponseMode mode) {
  return mode == ResponseMode::kFaithful || mode == ResponseMode::kAdaptive;
}

int tie_rank(ResponseMode mode) {
  switch (mode) {
    case ResponseMode::kDirect: return 0;
    case ResponseMode::kCautious: return 1;
    case ResponseMode::kAdaptive: return 2;
    case ResponseMode::kFaithful: return 3;
  }
  return 4;
}

Json to_json(const DatasetRecord& r) {
  Json j;
  j["instruction"] = r.instruction;
  j["input"] = r.input;
  j["output"] = r.output;
  j["meta"] = r.meta.is_null() ? Json::object() : r.meta;
  return j;
}

std::string render_dataset(std::vector<DatasetRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const DatasetRecord& a, const DatasetRecord& b) {
                     return a.instr_id < b.instr_id;
                   });
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    if (r.instruction.empty() || r.output.empty()) {
      throw PreconditionError("dataset record " + r.instr_id +
                              " has an empty instruction or output");
    }
    rows.push_back(to_json(r));
  }
  return to_jsonl(rows);
}

void emit_dataset(std::vector<DatasetRecord> records, const std::filesystem::path& path) {
  write_file_atomic(path, render_dataset(std::move(records)));
}

Json to_json(const ResponseLogEntry& e) {
  Json j;
  j["instr_id"] = e.instr_id;
  j["mode"] = std::string(to_string(e.mode));
  j["context_doc_ids"] = e.context_doc_ids;
  j["prompt_hash"] = e.prompt_hash;
  j["judge_score"] = e.judge_score ? Json(*e.judge_score) : Json(nullptr);
  j["winner"] = e.winner;
  return j;
}

ResponseSynthesizer::ResponseSynthesizer(Gateway& gateway, const PromptForge& forge,
                                         ResponseOptions options)
    : gateway_(gateway), forge_(forge), options_(std::move(options)) {
  if (options_.top_m < 1) throw ConfigError("response.top_m must be >= 1");
  if (options_.modes.empty()) throw ConfigError("response.modes must not be empty");
}

RetrievalIndex ResponseSynthesizer::build_index(std::span<const Document> docs) {
  if (docs.empty()) throw PreconditionError("build_index: no documents");
  std::vector<const Document*> unique;
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    if (seen.insert(d.doc_id).second) unique.push_back(&d);
  }
  std::vector<std::string> texts;
  for (const auto* d : unique) texts.push_back(d->text);

  std::vector<std::optional<EmbeddingVector>> vecs(unique.size());
  try {
    auto all = gateway_.embed(texts);
    for (std::size_t i = 0; i < all.size(); ++i) vecs[i] = std::move(all[i]);
  } catch (const GatewayError&) {
    // Isolate the failing documents.
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        vecs[i] = gateway_.embed_one(texts[i]);
      } catch (const GatewayError&) {
      }
    }
  }

  RetrievalIndex index;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    if (!vecs[i]) {
      ++index.omitted;
      continue;
    }
    index.doc_ids.push_back(unique[i]->doc_id);
    index.vectors.push_back(normalize(*vecs[i]));
    index.dim = index.vectors.back().dim();
  }
  return index;
}

std::vector<Retrieved> ResponseSynthesizer::retrieve(const RetrievalIndex& index,
                                                     const Instruction& instr,
                                                     std::size_t top_m) {
  if (top_m < 1) throw PreconditionError("retrieve: top_m must be >= 1");
  if (index.size() == 0) throw PreconditionError("retrieve: empty index");
  const EmbeddingVector q =
      instr.embedding ? normalize(*instr.embedding) : normalize(gateway_.embed_one(instr.text));
  if (q.dim() != index.dim) throw PreconditionError("retrieve: dimension mismatch");
  std::vector<Retrieved> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    all.push_back({index.doc_ids[i], dot(q, index.vectors[i])});
  }
  const std::size_t m = std::min(top_m, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(),
                    [](const Retrieved& a, const Retrieved& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.doc_id < b.doc_id;
                    });
  all.resize(m);
  return all;
}

std::string ResponseSynthesizer::build_prompt(const Instruction& instr, ResponseMode mode,
                                              std::span<const Document> context) const {
  if (uses_context(mode) && context.empty()) {
    throw PreconditionError(std::string(to_string(mode)) + " mode needs context documents");
  }
  if (!uses_context(mode) && !context.empty()) {
    throw PreconditionError(std::string(to_string(mode)) + " mode takes no context");
  }
  if (!uses_context(mode)) {
    std::string p = forge_.render(TemplateId::kQToA, {{"question", instr.text}}).text;
    if (mode == ResponseMode::kCautious) p = insert_line_before(p, "### QUESTION:", kCautiousLine);
    return p;
  }
  std::string joined;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) joined += "\n\n";
    joined += context[i].text;
  }
  std::string p =
      forge_.render(TemplateId::kQDocToA, {{"question", instr.text}, {"doc", joined}}).text;
  if (mode == ResponseMode::kFaithful) p = insert_line_before(p, "### Instruction:", kFaithfulLine);
  return p;
}

ResponseCandidate ResponseSynthesizer::generate_response(const Instruction& instr,
                                                         ResponseMode mode,
                                                         std::span<const Document> context) {
  ResponseCandidate c;
  c.instr_id = instr.instr_id;
  c.mode = mode;
  c.prompt = build_prompt(instr, mode, context);
  for (const auto& d : context) c.context_doc_ids.push_back(d.doc_id);
  const std::string tag(to_string(uses_context(mode) ? TemplateId::kQDocToA : TemplateId::kQToA));
  c.text = std::string(trim(gateway_.chat(gateway_.generation_request(c.prompt, tag))));
  return c;
}

std::optional<ResponseCandidate> ResponseSynthesizer::select_response(
    const Instruction& instr, std::vector<ResponseCandidate>& candidates) {
  if (candidates.size() < 2) {
    throw PreconditionError("select_response needs at least two candidates");
  }
  for (auto& c : candidates) {
    const auto prompt = forge_.render(TemplateId::kFaithfulnessEval,
                                      {{"instruction", instr.text}, {"response", c.text}});
    try {
      c.judge_score =
          gateway_.score_judge(prompt.text, std::string(to_string(TemplateId::kFaithfulnessEval)))
              .value;
    } catch (const VerdictParseError&) {
      c.judge_score.reset();
    } catch (const GatewayError&) {
      c.judge_score.reset();
    }
  }
  const ResponseCandidate* best = nullptr;
  for (const auto& c : candidates) {
    if (!c.judge_score) continue;
    if (best == nullptr || *c.judge_score > *best->judge_score ||
        (*c.judge_score == *best->judge_score && tie_rank(c.mode) < tie_rank(best->mode))) {
      best = &c;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::vector<DatasetRecord> ResponseSynthesizer::synthesize(std::span<const Instruction> pool,
                                                           std::span<const Document> docs,
                                                           const RetrievalIndex& index) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.doc_id, &d);

  struct Outcome {
    std::optional<DatasetRecord> record;
    std::vector<ResponseLogEntry> log;
    std::string drop_reason;
    std::exception_ptr error;
  };
  std::vector<Outcome> outcomes(pool.size());

  parallel_for(pool.size(), options_.workers, [&](std::size_t i) {
    auto& out = outcomes[i];
    const Instruction& instr = pool[i];
    try {
      std::vector<Document> context;
      const Document* origin = nullptr;
      if (options_.include_origin_doc) {
        if (auto it = by_id.find(instr.origin_doc_id); it != by_id.end()) origin = it->second;
      }
      if (origin) context.push_back(*origin);
      for (const auto& r : retrieve(index, instr, options_.top_m + (origin ? 1 : 0))) {
        if (origin && r.doc_id == origin->doc_id) continue;
        if (context.size() >= options_.top_m + (origin ? 1 : 0)) break;
        if (auto it = by_id.find(r.doc_id); it != by_id.end()) context.push_back(*it->second);
      }

      std::vector<ResponseCandidate> candidates;
      for (ResponseMode mode : options_.modes) {
        try {
          if (uses_context(mode)) {
            candidates.push_back(generate_response(instr, mode, context));
          } else {
            candidates.push_back(generate_response(instr, mode, {}));
          }
        } catch (const GatewayError&) {
        }
      }
      std::erase_if(candidates, [](const ResponseCandidate& c) { return c.text.empty(); });
      if (candidates.size() < 2) {
        out.drop_reason = "insufficient_candidates";
        return;
      }
      auto winner = select_response(instr, candidates);
      for (const auto& c : candidates) {
        out.log.push_back({instr.instr_id, c.mode, c.context_doc_ids,
                           sha256_hex(c.prompt).substr(0, 16), c.judge_score,
                           winner && c.mode == winner->mode});
      }
      if (!winner) {
        out.drop_reason = "unparseable_judge";
        return;
      }
      DatasetRecord rec;
      rec.instr_id = instr.instr_id;
      rec.instruction = instr.text;
      rec.output = winner->text;
      rec.meta["instr_id"] = instr.instr_id;
      rec.meta["origin_doc_id"] = instr.origin_doc_id;
      rec.meta["iteration"] = instr.iteration;
      rec.meta["winning_mode"] = std::string(to_string(winner->mode));
      rec.meta["context_doc_ids"] = winner->context_doc_ids;
      Json scores = Json::object();
      for (const auto& c : candidates) {
        scores[std::string(to_string(c.mode))] =
            c.judge_score ? Json(*c.judge_score) : Json(nullptr);
      }
      rec.meta["judge_scores"] = std::move(scores);
      out.record = std::move(rec);
    } catch (...) {
      out.error = std::current_exception();
    }
  });

  std::vector<DatasetRecord> records;
  accounting_.input += pool.size();
  for (auto& o : outcomes) {
    if (o.error) std::rethrow_exception(o.error);
    for (auto& e : o.log) log_.push_back(std::move(e));
    if (o.record) {
      records.push_back(std::move(*o.record));
    } else {
      accounting_.drop(o.drop_reason);
    }
  }
  accounting_.output += records.size();
  return records;
}

}  // namespace docinstruct
