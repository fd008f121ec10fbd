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

#include "docinstruct/stats.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace docinstruct {

LengthSummary summarize_lengths(std::span<const std::size_t> lengths, std::size_t bin_width) {
  if (bin_width == 0) throw PreconditionError("bin_width must be > 0");
  LengthSummary s;
  s.count = lengths.size();
  if (lengths.empty()) return s;
  std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  s.mean = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), std::size_t{0})) /
           static_cast<double>(sorted.size());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? static_cast<double>(sorted[mid])
                               : (static_cast<double>(sorted[mid - 1]) + static_cast<double>(sorted[mid])) / 2.0;
  s.max = sorted.back();
  for (std::size_t v : sorted) ++s.histogram[v / bin_width * bin_width];
  return s;
}

namespace {

struct Row {
  std::string instruction;
  std::string input;
  std::string output;
};

std::optional<double> mean_score(Gateway& gateway, const PromptForge& forge, TemplateId id,
                                 const std::vector<Row>& rows, std::size_t workers,
                                 std::size_t& failures) {
  std::vector<std::optional<int>> scores(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    Bindings b{{"instruction", rows[i].instruction}};
    if (id == TemplateId::kQualityScorer) b["output"] = rows[i].output;
    try {
      scores[i] = gateway.score_judge(forge.render(id, b).text, std::string(to_string(id))).value;
    } catch (const Error&) {
    }
  });
  double sum = 0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    if (s) {
      sum += *s;
      ++n;
    } else {
      ++failures;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

DatasetStats compute_stats(const std::filesystem::path& dataset, Gateway& gateway,
                           const PromptForge& forge, const StatsOptions& options) {
  DatasetStats st;
  std::vector<Row> rows;
  for (auto& line : read_jsonl(dataset, st.malformed)) {
    const Json& j = line.value;
    if (!j.is_object() || !j.contains("instruction") || !j["instruction"].is_string()) {
      st.malformed.push_back({line.line, "record has no string \"instruction\" field"});
      continue;
    }
    rows.push_back({j["instruction"].get<std::string>(), j.value("input", std::string()),
                    j.value("output", std::string())});
  }
  st.records = rows.size();

  std::vector<std::size_t> lengths;
  std::vector<std::string> texts;
  for (const auto& r : rows) {
    const std::string text = r.input.empty() ? r.instruction : r.instruction + "\n" + r.input;
    lengths.push_back(word_count(text));
    texts.push_back(r.instruction);
  }
  st.lengths = summarize_lengths(lengths);

  if (rows.size() >= 2) {
    auto embs = gateway.embed(texts);
    for (auto& e : embs) e = normalize(e);
    if (embs.size() <= options.brute_force_limit) {
      st.max_pairwise_sim = max_pairwise_sim(embs);
    } else {
      st.similarity_sampled = true;
      Rng rng(options.rng_seed);
      double best = -1.0;
      for (std::size_t k = 0; k < options.sampled_pairs; ++k) {
        const std::size_t i = rng.below(embs.size());
        std::size_t j = rng.below(embs.size() - 1);
        if (j >= i) ++j;
        best = std::max(best, cosine_sim(embs[i], embs[j]));
      }
      st.max_pairwise_sim = best;
    }
    DiversityParams p;
    p.threshold = options.community_threshold;
    p.min_community_size = 1;
    st.communities = detect_communities(embs, p).size();
  } else {
    st.communities = rows.size();
  }

  if (options.run_scorers && !rows.empty()) {
    st.quality_mean = mean_score(gateway, forge, TemplateId::kQualityScorer, rows,
                                 options.workers, st.scorer_failures);
    st.complexity_mean = mean_score(gateway, forge, TemplateId::kComplexityScorer, rows,
                                    options.workers, st.scorer_failures);
  }
  return st;
}

Json to_json(const DatasetStats& s) {
  Json j;
  j["records"] = s.records;
  Json bad = Json::array();
  for (const auto& e : s.malformed) bad.push_back({{"line", e.line}, {"error", e.message}});
  j["malformed"] = bad;
  Json hist = Json::array();
  for (const auto& [start, n] : s.lengths.histogram) {
    hist.push_back({{"from", start}, {"to", start + 4}, {"count", n}});
  }
  j["length"] = {{"mean", s.lengths.mean},
                 {"median", s.lengths.median},
                 {"max", s.lengths.max},
                 {"histogram", hist}};
  j["max_pairwise_similarity"] =
      s.max_pairwise_sim ? Json(*s.max_pairwise_sim) : Json(nullptr);
  j["similarity_sampled"] = s.similarity_sampled;
  j["diversity_proxy"] = {
      {"communities", s.communities},
      {"threshold", 0.7},
      {"note", "substitute measure: count of embedding communities"}};
  if (s.quality_mean || s.complexity_mean || s.scorer_failures) {
    j["scorers"] = {{"quality_mean", s.quality_mean ? Json(*s.quality_mean) : Json(nullptr)},
                    {"complexity_mean",
                     s.complexity_mean ? Json(*s.complexity_mean) : Json(nullptr)},
                    {"failures", s.scorer_failures}};
  }
  return j;
}

std::string render_stats_text(const DatasetStats& s) {
  std::ostringstream os;
  os << "records: " << s.records << "\n";
  for (const auto& e : s.malformed) os << "  malformed line " << e.line << ": " << e.message << "\n";
  os << "length (words): mean " << s.lengths.mean << ", median " << s.lengths.median << ", max "
     << s.lengths.max << "\n";
  for (const auto& [start, n] : s.lengths.histogram) {
    os << "  " << start << "-" << start + 4 << ": " << n << "\n";
  }
  if (s.max_pairwise_sim) {
    os << "max pairwise similarity: " << *s.max_pairwise_sim
       << (s.similarity_sampled ? " (sampled)" : "") << "\n";
  }
  os << "diversity proxy (substitute): " << s.communities
     << " embedding communities at threshold 0.7\n";
  if (s.quality_mean) os << "quality mean: " << *s.quality_mean << "\n";
  if (s.complexity_mean) os << "complexity mean: " << *s.complexity_mean << "\n";
  if (s.scorer_failures) os << "scorer failures: " << s.scorer_failures << "\n";
  return os.str();
}

}  // namespace docinstruct
