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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docinstruct/gateway.hpp"
#include "docinstruct/prompts.hpp"

namespace docinstruct {

struct LengthSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  std::size_t max = 0;
  std::map<std::size_t, std::size_t> histogram;  // bin start -> count
};

// Histogram bins are [5k, 5k + 5).
LengthSummary summarize_lengths(std::span<const std::size_t> lengths,
                                std::size_t bin_width = 5);

struct StatsOptions {
  bool run_scorers = false;
  std::size_t brute_force_limit = 5000;  // exact max similarity up to this size
  std::size_t sampled_pairs = 200000;
  double community_threshold = 0.7;
  std::uint64_t rng_seed = 42;
  std::size_t workers = 8;
};

struct DatasetStats {
  std::size_t records = 0;
  std::vector<LineError> malformed;
  LengthSummary lengths;
  std::optional<double> max_pairwise_sim;  // empty below two records
  bool similarity_sampled = false;
  std::size_t communities = 0;
  std::optional<double> quality_mean;
  std::optional<double> complexity_mean;
  std::size_t scorer_failures = 0;
};

DatasetStats compute_stats(const std::filesystem::path& dataset, Gateway& gateway,
                           const PromptForge& forge, const StatsOptions& options = {});

Json to_json(const DatasetStats& s);
std::string render_stats_text(const DatasetStats& s);

}  // namespace docinstruct
