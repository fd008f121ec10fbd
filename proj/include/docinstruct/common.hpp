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

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace docinstruct {

// Error hierarchy. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---- text helpers ----------------------------------------------------------

bool is_space(char c);
std::string_view trim(std::string_view s);
// Collapses every whitespace run to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);
// Lowercase (ASCII) + whitespace collapse; the key used for content hashing.
std::string normalize_for_hash(std::string_view s);
std::vector<std::string_view> split_words(std::string_view s);
std::size_t word_count(std::string_view s);

// ---- hashing ---------------------------------------------------------------

std::string sha256_hex(std::string_view data);
// 16 hex chars of sha256(normalize_for_hash(text)).
std::string content_id(std::string_view text);
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0);
// Stable 64-bit mix used to derive sub-seeds.
std::uint64_t mix64(std::uint64_t x);

// ---- deterministic RNG -----------------------------------------------------

// Wraps mt19937_64 (whose output sequence is fixed by the standard) with
// portable bounded sampling; std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform double in [0, 1).
  double uniform();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // k distinct indices from [0, n), in sampling order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// ---- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

// ---- parallelism -----------------------------------------------------------

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must not throw;
// callers capture per-item failures themselves so results stay index-ordered.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace docinstruct
