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

#include <cstddef>
#include <span>
#include <vector>

#include "docinstruct/corpus.hpp"

namespace docinstruct {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

struct Community {
  std::vector<std::size_t> member_indices;  // ascending
  std::size_t representative_index = 0;     // lowest member index

  std::size_t size() const { return member_indices.size(); }
};

struct DiversityParams {
  double threshold = 0.7;
  std::size_t min_community_size = 2;
  std::size_t batch_size = 1024;
  double retention_ratio = 0.06;

  void validate() const;
};

// Unit L2 norm. Throws PreconditionError on an all-zero vector.
EmbeddingVector normalize(const EmbeddingVector& v);

// Cosine similarity of the normalized inputs. Throws on dim mismatch.
double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

// Threshold community detection over batched cosine rows. A row seeds a
// candidate when its min_community_size-th largest similarity reaches the
// threshold; the candidate is every index at or above the threshold, found by
// a top-k retrieval that doubles until the boundary value falls below it.
// Candidates are ranked by size (ties: lower seed row first) and kept greedily
// when disjoint from everything kept before.
std::vector<Community> detect_communities(std::span<const EmbeddingVector> embs,
                                          const DiversityParams& params);

// Representatives of communities in size order, then indices outside every
// community in input order, truncated to ceil(retention_ratio * n).
std::vector<std::size_t> diversity_select_indices(
    std::span<const Community> communities, std::size_t n,
    double retention_ratio);

std::vector<Document> diversity_select(std::span<const Document> docs,
                                       std::span<const EmbeddingVector> embs,
                                       const DiversityParams& params);

// Largest off-diagonal cosine similarity. Requires at least two vectors.
double max_pairwise_sim(std::span<const EmbeddingVector> embs);

std::size_t retention_quota(std::size_t n, double retention_ratio);

}  // namespace docinstruct
