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
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "docinstruct/seeds.hpp"

namespace docinstruct {

struct SeedStats {
  std::string instr_id;
  double quality_sum = 0.0;
  std::size_t n_selected = 0;

  double mean_quality() const {
    return quality_sum / static_cast<double>(std::max<std::size_t>(n_selected, 1));
  }
};

struct BanditState {
  std::map<std::string, SeedStats> stats;
  std::size_t total_selections = 0;  // one per selection event (round)
  double exploration_c = 1.0;
  std::uint64_t rng_seed = 0;
};

Json to_json(const BanditState& state);
BanditState bandit_state_from_json(const Json& j);

enum class SelectionStrategy { kUcb, kRandom };
enum class QualityMeasure { kWordCount };

struct AugmentConfig {
  std::size_t k_exemplars = 5;
  double tau = 0.85;
  std::size_t rounds = 500;            // 0: bounded by target_pool_size only
  std::size_t target_pool_size = 0;    // 0: bounded by rounds only
  QualityMeasure quality_measure = QualityMeasure::kWordCount;
  std::size_t calls_per_round = 1;
  std::size_t checkpoint_interval = 500;
  SelectionStrategy strategy = SelectionStrategy::kUcb;
  std::string command;  // bound to the {command} slot of the augmentation prompt
  std::uint64_t rng_seed = 42;

  void validate() const;
};

inline constexpr double kUnselectedScore = std::numeric_limits<double>::infinity();

// mean + c * sqrt(2 ln(total) / n); +inf for never-selected seeds.
double ucb_score(const SeedStats& s, std::size_t total, double c);

// Registers SeedStats (n_selected = 0, quality_sum = own word count) for
// every pool member that has none yet.
void register_pool(BanditState& state, std::span<const Instruction> pool);

// The k pool members with the highest UCB score, scored with
// N = total_selections + 1. Ties: higher mean quality, then smaller instr_id.
// Increments n_selected of each chosen member and total_selections by one.
std::vector<std::size_t> select_exemplars(BanditState& state,
                                          std::span<const Instruction> pool,
                                          std::size_t k);

// Uniform baseline with the same bookkeeping.
std::vector<std::size_t> select_random(BanditState& state,
                                       std::span<const Instruction> pool,
                                       std::size_t k, Rng& rng);

struct AugmentAudit {
  std::size_t round = 0;
  std::string doc_id;
  std::vector<std::string> exemplar_ids;
  std::string candidate_hash;  // instr_id of the candidate, empty if none parsed
  bool accepted = false;
  std::string reject_reason;
  std::size_t candidate_words = 0;
};
Json to_json(const AugmentAudit& a);
AugmentAudit augment_audit_from_json(const Json& j);

struct BootstrapProgress {
  std::size_t rounds_done = 0;
  std::size_t epoch_accepts = 0;
};

struct BootstrapHooks {
  // Called after every checkpoint_interval rounds and once on completion.
  std::function<void(const std::vector<Instruction>&, const BanditState&,
                     const BootstrapProgress&)>
      checkpoint;
  // Abandon the run after this many rounds in this invocation, skipping the
  // final checkpoint the way a crash would (0: no limit).
  std::size_t stop_after = 0;
};

struct BootstrapResult {
  std::vector<Instruction> pool;
  bool interrupted = false;  // stop_after reached before completion
};

class UcbAugmentor {
 public:
  UcbAugmentor(Gateway& gateway, const PromptForge& forge, SeedGenerator& filter,
               AugmentConfig config);

  // Accept iff the candidate's max cosine similarity to every pool member is
  // below tau. Embeddings are fetched through the gateway when missing.
  bool tau_dedup(Instruction& candidate, std::span<const Instruction> pool, double tau);

  // One selection + generation step against `doc`. Accepted candidates are
  // appended to `pool`, registered with the bandit, and their word counts
  // credited to every exemplar used.
  std::vector<Instruction> augment_round(BanditState& state,
                                         std::vector<Instruction>& pool,
                                         const Document& doc, std::size_t round);

  // Iterates rounds over per-epoch seeded shuffles of `docs` until the round
  // budget or target pool size is reached. Throws StageError when a whole
  // epoch produces no acceptance.
  BootstrapResult run_bootstrap(std::vector<Instruction> pool,
                                std::span<const Document> docs, BanditState& state,
                                BootstrapProgress& progress,
                                const BootstrapHooks& hooks = {});

  const std::vector<AugmentAudit>& audit() const { return audit_; }
  std::vector<AugmentAudit> take_audit() { return std::exchange(audit_, {}); }

  // Document order for one epoch.
  std::vector<std::size_t> epoch_order(std::size_t epoch, std::size_t n) const;

 private:
  void ensure_embedding(Instruction& instr);

  Gateway& gateway_;
  const PromptForge& forge_;
  SeedGenerator& filter_;
  AugmentConfig config_;
  std::vector<AugmentAudit> audit_;
};

}  // namespace docinstruct
