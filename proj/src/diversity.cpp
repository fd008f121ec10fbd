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

#include "docinstruct/diversity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "docinstruct/common.hpp"

namespace docinstruct {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix normalized_matrix(std::span<const EmbeddingVector> embs) {
  const std::size_t dim = embs.front().dim();
  RowMatrix m(embs.size(), dim);
  for (std::size_t i = 0; i < embs.size(); ++i) {
    if (embs[i].dim() != dim) {
      throw PreconditionError("embedding " + std::to_string(i) + " has dim " +
                              std::to_string(embs[i].dim()) + ", expected " +
                              std::to_string(dim));
    }
    EmbeddingVector n = normalize(embs[i]);
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = n.values[j];
  }
  return m;
}

struct Candidate {
  std::size_t seed;
  std::vector<std::size_t> members;
};

}  // namespace

void DiversityParams::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw PreconditionError("diversity threshold must lie in (0, 1)");
  }
  if (min_community_size < 1) {
    throw PreconditionError("min_community_size must be >= 1");
  }
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (!(retention_ratio > 0.0 && retention_ratio <= 1.0)) {
    throw PreconditionError("retention_ratio must lie in (0, 1]");
  }
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  double sq = 0.0;
  for (double x : v.values) sq += x * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw PreconditionError("degenerate embedding: zero or non-finite norm");
  }
  const double norm = std::sqrt(sq);
  EmbeddingVector out;
  out.values.reserve(v.dim());
  for (double x : v.values) out.values.push_back(x / norm);
  return out;
}

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw PreconditionError("cosine_sim dimension mismatch: " +
                            std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }
  const EmbeddingVector na = normalize(a);
  const EmbeddingVector nb = normalize(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < na.dim(); ++i) dot += na.values[i] * nb.values[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<Community> detect_communities(std::span<const EmbeddingVector> embs,
                                          const DiversityParams& params) {
  params.validate();
  const std::size_t n = embs.size();
  if (n == 0 || n < params.min_community_size) return {};

  const RowMatrix m = normalized_matrix(embs);
  const std::size_t k = params.min_community_size;
  std::size_t sort_max_size = std::min(2 * k, n);

  std::vector<Candidate> candidates;
  std::vector<double> row(n);
  std::vector<std::size_t> order(n);

  for (std::size_t start = 0; start < n; start += params.batch_size) {
    const std::size_t rows = std::min(params.batch_size, n - start);
    const RowMatrix scores =
        m.middleRows(static_cast<Eigen::Index>(start),
                     static_cast<Eigen::Index>(rows)) *
        m.transpose();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
      }
      // k-th largest similarity in this row
      std::vector<double> scratch = row;
      std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(),
                       std::greater<>());
      if (scratch[k - 1] < params.threshold) continue;

      auto by_score = [&](std::size_t a, std::size_t b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return a < b;
      };
      auto top = [&](std::size_t count) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + count, order.end(),
                          by_score);
      };
      top(sort_max_size);
      while (row[order[sort_max_size - 1]] >= params.threshold &&
             sort_max_size < n) {
        sort_max_size = std::min(2 * sort_max_size, n);
        top(sort_max_size);
      }
      Candidate c{start + r, {}};
      for (std::size_t t = 0; t < sort_max_size; ++t) {
        if (row[order[t]] < params.threshold) break;
        c.members.push_back(order[t]);
      }
      std::sort(c.members.begin(), c.members.end());
      candidates.push_back(std::move(c));
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.members.size() > b.members.size();
                   });

  std::vector<char> taken(n, 0);
  std::vector<Community> out;
  for (auto& c : candidates) {
    bool disjoint = std::none_of(c.members.begin(), c.members.end(),
                                 [&](std::size_t i) { return taken[i] != 0; });
    if (!disjoint) continue;
    for (std::size_t i : c.members) taken[i] = 1;
    Community com;
    com.representative_index = c.members.front();
    com.member_indices = std::move(c.members);
    out.push_back(std::move(com));
  }
  return out;
}

std::size_t retention_quota(std::size_t n, double retention_ratio) {
  // The epsilon absorbs representation error, e.g. 0.06 * 1000.
  const double raw = retention_ratio * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

std::vector<std::size_t> diversity_select_indices(
    std::span<const Community> communities, std::size_t n,
    double retention_ratio) {
  const std::size_t quota = retention_quota(n, retention_ratio);
  std::vector<std::size_t> out;
  std::vector<char> clustered(n, 0);
  for (const auto& c : communities) {
    for (std::size_t i : c.member_indices) clustered[i] = 1;
  }
  for (const auto& c : communities) {
    if (out.size() >= quota) return out;
    out.push_back(c.representative_index);
  }
  for (std::size_t i = 0; i < n && out.size() < quota; ++i) {
    if (!clustered[i]) out.push_back(i);
  }
  return out;
}

std::vector<Document> diversity_select(std::span<const Document> docs,
                                       std::span<const EmbeddingVector> embs,
                                       const DiversityParams& params) {
  if (docs.size() != embs.size()) {
    throw PreconditionError("diversity_select: docs and embeddings differ in length");
  }
  const auto communities = detect_communities(embs, params);
  std::vector<Document> out;
  for (std::size_t i :
       diversity_select_indices(communities, docs.size(), params.retention_ratio)) {
    out.push_back(docs[i]);
  }
  return out;
}

double max_pairwise_sim(std::span<const EmbeddingVector> embs) {
  if (embs.size() < 2) {
    throw PreconditionError("max_pairwise_sim needs at least two vectors");
  }
  const RowMatrix m = normalized_matrix(embs);
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.rows(); ++j) {
      best = std::max(best, m.row(i).dot(m.row(j)));
    }
  }
  return best;
}

}  // namespace docinstruct
