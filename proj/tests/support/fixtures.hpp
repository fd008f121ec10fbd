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

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "docinstruct/config.hpp"
#include "docinstruct/diversity.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("docinstruct-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// Points scattered around a few random centres plus uniform noise points, so
// threshold communities of several sizes actually occur.
inline std::vector<docinstruct::EmbeddingVector> clustered_vectors(std::size_t n, std::size_t dim,
                                                                   std::uint64_t seed,
                                                                   double spread = 0.25) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> n_centres(1, std::max<std::size_t>(2, n / 8));
  std::vector<std::vector<double>> centres(n_centres(gen));
  for (auto& c : centres) {
    c.resize(dim);
    for (double& x : c) x = normal(gen);
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, centres.size() - 1);
  std::vector<docinstruct::EmbeddingVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    docinstruct::EmbeddingVector v;
    v.values.resize(dim);
    if (coin(gen) < 0.25) {
      for (double& x : v.values) x = normal(gen);
    } else {
      const auto& c = centres[pick(gen)];
      double norm = 0;
      for (double x : c) norm += x * x;
      norm = std::sqrt(norm);
      for (std::size_t d = 0; d < dim; ++d) v.values[d] = c[d] / norm + spread * normal(gen) / std::sqrt(double(dim));
    }
    out.push_back(std::move(v));
  }
  return out;
}

inline std::vector<std::vector<double>> raw(const std::vector<docinstruct::EmbeddingVector>& v) {
  std::vector<std::vector<double>> out;
  for (const auto& e : v) out.push_back(e.values);
  return out;
}

// Pseudo-words over a fixed alphabet; documents share vocabulary but are
// distinct.
inline std::vector<std::string> synthetic_texts(std::size_t n, std::uint64_t seed,
                                                std::size_t min_words = 70,
                                                std::size_t max_words = 150) {
  std::mt19937_64 gen(seed);
  const std::string cons = "bcdfghklmnprstvz", vow = "aeiou";
  std::vector<std::string> vocab;
  for (int i = 0; i < 3000; ++i) {
    std::string w;
    for (int s = 0; s < 2; ++s) {
      w += cons[gen() % cons.size()];
      w += vow[gen() % vow.size()];
      w += cons[gen() % cons.size()];
    }
    vocab.push_back(w);
  }
  std::vector<std::string> out;
  for (std::size_t d = 0; d < n; ++d) {
    const std::size_t words = min_words + gen() % (max_words - min_words + 1);
    std::string text;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += (w % 40 == 0) ? ".\n" : " ";
      text += vocab[gen() % vocab.size()];
    }
    out.push_back(text + ".");
  }
  return out;
}

inline void write_corpus(const fs::path& path, const std::vector<std::string>& texts) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    docinstruct::Json j;
    j["content"] = texts[i];
    j["url"] = "https://example.org/doc/" + std::to_string(i);
    out << j.dump() << "\n";
  }
}

// Mock-backend pipeline config rooted in `dir` with a corpus of n documents.
inline docinstruct::PipelineConfig mock_pipeline(const fs::path& dir, std::size_t n_docs,
                                                 std::uint64_t corpus_seed = 7) {
  write_corpus(dir / "corpus.jsonl", synthetic_texts(n_docs, corpus_seed));
  docinstruct::Json j = {{"paths", {{"corpus", "corpus.jsonl"}, {"workdir", "work"}}},
                         {"mock", {{"enabled", true}}}};
  auto c = docinstruct::config_from_json(j, dir);
  c.workers = 4;
  return c;
}

}  // namespace fixtures
