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

#include "docinstruct/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace docinstruct {

void AugmentConfig::validate() const {
  if (k_exemplars != 5) {
    throw ConfigError("augment.k_exemplars must be 5 (the prompt has five example slots)");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("augment.tau must lie in (0, 1)");
  if (rounds == 0 && target_pool_size == 0) {
    throw ConfigError("augment needs rounds > 0 or target_pool_size > 0");
  }
  if (calls_per_round == 0) throw ConfigError("augment.calls_per_round must be >= 1");
}

Json to_json(const BanditState& state) {
  Json j;
  j["total_selections"] = state.total_selections;
  j["exploration_c"] = state.exploration_c;
  j["rng_seed"] = state.rng_seed;
  Json stats = Json::array();
  for (const auto& [id, s] : state.stats) {
    stats.push_back(Json{{"instr_id", id},
                         {"quality_sum", s.quality_sum},
                         {"n_selected", s.n_selected}});
  }
  j["stats"] = std::move(stats);
  return j;
}

BanditState bandit_state_from_json(const Json& j) {
  BanditState state;
  state.total_selections = j.at("total_selections").get<std::size_t>();
  state.exploration_c = j.at("exploration_c").get<double>();
  state.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  for (const auto& s : j.at("stats")) {
    SeedStats st;
    st.instr_id = s.at("instr_id").get<std::string>();
    st.quality_sum = s.at("quality_sum").get<double>();
    st.n_selected = s.at("n_selected").get<std::size_t>();
    state.stats.emplace(st.instr_id, st);
  }
  return state;
}

double ucb_score(const SeedStats& s, std::size_t total, double c) {
  if (s.n_selected == 0) return kUnselectedScore;
  const double n = static_cast<double>(std::max<std::size_t>(total, 1));
  return s.mean_quality() +
         c * std::sqrt(2.0 * std::log(n) / static_cast<double>(s.n_selected));
}

void register_pool(BanditState& state, std::span<const Instruction> pool) {
  for (const auto& in : pool) {
    if (!state.stats.count(in.instr_id)) {
      state.stats.emplace(in.instr_id,
                          SeedStats{in.instr_id, static_cast<double>(in.word_count), 0});
    }
  }
}

namespace {

void record_selection(BanditState& state, std::span<const Instruction> pool,
                      std::span<const std::size_t> chosen) {
  for (std::size_t i : chosen) ++state.stats.at(pool[i].instr_id).n_selected;
  ++state.total_selections;
}

void require_pool(BanditState& state, std::span<const Instruction> pool, std::size_t k) {
  if (pool.size() < k) {
    throw PreconditionError("exemplar selection needs " + std::to_string(k) +
                            " pool members, have " + std::to_string(pool.size()));
  }
  register_pool(state, pool);
}

}  // namespace

std::vector<std::size_t> select_exemplars(BanditState& state,
                                          std::span<const Instruction> pool,
                                          std::size_t k) {
  require_pool(state, pool, k);
  const std::size_t n_total = state.total_selections + 1;
  struct Scored {
    double ucb;
    double mean;
    const std::string* id;
    std::size_t index;
  };
  std::vector<Scored> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& s = state.stats.at(pool[i].instr_id);
    scored.push_back({ucb_score(s, n_total, state.exploration_c), s.mean_quality(),
                      &pool[i].instr_id, i});
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), [](const Scored& a, const Scored& b) {
                      if (a.ucb != b.ucb) return a.ucb > b.ucb;
                      if (a.mean != b.mean) return a.mean > b.mean;
                      return *a.id < *b.id;
                    });
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < k; ++i) chosen.push_back(scored[i].index);
  record_selection(state, pool, chosen);
  return chosen;
}

std::vector<std::size_t> select_random(BanditState& state,
                                       std::span<const Instruction> pool,
                                       std::size_t k, Rng& rng) {
  require_pool(state, pool, k);
  auto chosen = rng.sample_without_replacement(pool.size(), k);
  record_selection(state, pool, chosen);
  return chosen;
}

Json to_json(const AugmentAudit& a) {
  Json j;
  j["round"] = a.round;
  j["doc_id"] = a.doc_id;
  j["exemplar_ids"] = a.exemplar_ids;
  j["candidate_hash"] = a.candidate_hash;
  j["accepted"] = a.accepted;
  j["reject_reason"] = a.reject_reason;
  j["candidate_words"] = a.candidate_words;
  return j;
}

AugmentAudit augment_audit_from_json(const Json& j) {
  AugmentAudit a;
  a.round = j.at("round").get<std::size_t>();
  a.doc_id = j.at("doc_id").get<std::string>();
  a.exemplar_ids = j.at("exemplar_ids").get<std::vector<std::string>>();
  a.candidate_hash = j.at("candidate_hash").get<std::string>();
  a.accepted = j.at("accepted").get<bool>();
  a.reject_reason = j.at("reject_reason").get<std::string>();
  a.candidate_words = j.value("candidate_words", std::size_t{0});
  return a;
}

UcbAugmentor::UcbAugmentor(Gateway& gateway, const PromptForge& forge,
                           SeedGenerator& filter, AugmentConfig config)
    : gateway_(gateway), forge_(forge), filter_(filter), config_(std::move(config)) {
  config_.validate();
}

void UcbAugmentor::ensure_embedding(Instruction& instr) {
  if (!instr.embedding) instr.embedding = normalize(gateway_.embed_one(instr.text));
}

bool UcbAugmentor::tau_dedup(Instruction& candidate, std::span<const Instruction> pool,
                             double tau) {
  ensure_embedding(candidate);
  const auto& c = candidate.embedding->values;
  for (const auto& member : pool) {
    EmbeddingVector fetched;
    const EmbeddingVector* e = member.embedding ? &*member.embedding : nullptr;
    if (e == nullptr) {
      fetched = normalize(gateway_.embed_one(member.text));
      e = &fetched;
    }
    if (e->dim() != c.size()) throw PreconditionError("tau_dedup: dimension mismatch");
    const double sim = std::inner_product(c.begin(), c.end(), e->values.begin(), 0.0);
    if (sim >= tau) return false;
  }
  return true;
}

std::vector<Instruction> UcbAugmentor::augment_round(BanditState& state,
                                                     std::vector<Instruction>& pool,
                                                     const Document& doc,
                                                     std::size_t round) {
  std::vector<std::size_t> chosen;
  if (config_.strategy == SelectionStrategy::kUcb) {
    chosen = select_exemplars(state, pool, config_.k_exemplars);
  } else {
    Rng rng(mix64(config_.rng_seed ^ mix64(round)));
    chosen = select_random(state, pool, config_.k_exemplars, rng);
  }
  std::vector<std::string> texts;
  std::vector<std::string> exemplar_ids;
  for (std::size_t i : chosen) {
    texts.push_back(pool[i].text);
    exemplar_ids.push_back(pool[i].instr_id);
  }
  const auto prompt = forge_.think_different_prompt(doc, texts, config_.command);

  std::vector<Instruction> accepted;
  for (std::size_t call = 0; call < config_.calls_per_round; ++call) {
    AugmentAudit rec{round, doc.doc_id, exemplar_ids, {}, false, {}, 0};
    auto reject = [&](std::string reason) {
      rec.reject_reason = std::move(reason);
      audit_.push_back(rec);
    };
    std::string reply;
    try {
      reply = gateway_.chat(gateway_.generation_request(
          prompt.text, std::string(to_string(TemplateId::kThinkDifferent)),
          static_cast<int>(call)));
    } catch (const GatewayError&) {
      reject("gateway_error");
      continue;
    }
    std::string text = parse_instruction_reply(reply);
    if (text.empty()) {
      reject("empty_reply");
      continue;
    }
    Instruction cand =
        make_instruction(std::move(text), doc.doc_id, std::nullopt, static_cast<int>(round));
    rec.candidate_hash = cand.instr_id;
    rec.candidate_words = cand.word_count;

    std::vector<FilterOutcome> outcomes;
    const auto decision = filter_.check_instruction(cand, outcomes);
    if (!decision.keep) {
      reject(decision.reason);
      continue;
    }
    bool novel = false;
    try {
      novel = tau_dedup(cand, pool, config_.tau);
    } catch (const GatewayError&) {
      reject("embedding_error");
      continue;
    }
    if (!novel) {
      reject("similar");
      continue;
    }

    const double quality = static_cast<double>(cand.word_count);
    for (const auto& id : exemplar_ids) state.stats.at(id).quality_sum += quality;
    state.stats.emplace(cand.instr_id, SeedStats{cand.instr_id, quality, 0});
    rec.accepted = true;
    audit_.push_back(rec);
    pool.push_back(cand);
    accepted.push_back(std::move(cand));
  }
  return accepted;
}

std::vector<std::size_t> UcbAugmentor::epoch_order(std::size_t epoch, std::size_t n) const {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix64(config_.rng_seed ^ mix64(0xe90c0000ULL + epoch)));
  rng.shuffle(order);
  return order;
}

BootstrapResult UcbAugmentor::run_bootstrap(std::vector<Instruction> pool,
                                            std::span<const Document> docs,
                                            BanditState& state,
                                            BootstrapProgress& progress,
                                            const BootstrapHooks& hooks) {
  if (pool.empty()) throw PreconditionError("run_bootstrap: empty seed pool");
  if (docs.empty()) throw PreconditionError("run_bootstrap: no documents");
  register_pool(state, pool);
  for (auto& in : pool) ensure_embedding(in);

  const std::size_t n_docs = docs.size();
  std::size_t cached_epoch = SIZE_MAX;
  std::vector<std::size_t> order;
  std::size_t this_run = 0;
  BootstrapResult result;

  auto done = [&] {
    if (config_.target_pool_size > 0 && pool.size() >= config_.target_pool_size) return true;
    return config_.rounds > 0 && progress.rounds_done >= config_.rounds;
  };

  while (!done()) {
    if (hooks.stop_after > 0 && this_run >= hooks.stop_after) {
      result.interrupted = true;
      break;
    }
    const std::size_t r = progress.rounds_done;
    const std::size_t epoch = r / n_docs;
    if (epoch != cached_epoch) {
      order = epoch_order(epoch, n_docs);
      cached_epoch = epoch;
    }
    const auto accepted = augment_round(state, pool, docs[order[r % n_docs]], r + 1);
    progress.epoch_accepts += accepted.size();
    ++progress.rounds_done;
    ++this_run;
    if (progress.rounds_done % n_docs == 0) {
      if (progress.epoch_accepts == 0) {
        throw StageError("augmentation stagnated: no candidate accepted during epoch " +
                         std::to_string(epoch) + " (" + std::to_string(n_docs) +
                         " rounds); check tau, the filters, or the generator");
      }
      progress.epoch_accepts = 0;
    }
    if (hooks.checkpoint && config_.checkpoint_interval > 0 &&
        progress.rounds_done % config_.checkpoint_interval == 0) {
      hooks.checkpoint(pool, state, progress);
    }
  }
  if (hooks.checkpoint && !result.interrupted) hooks.checkpoint(pool, state, progress);
  result.pool = std::move(pool);
  return result;
}

}  // namespace docinstruct
