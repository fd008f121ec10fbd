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

#include <cctype>

#include "docinstruct/gateway.hpp"

namespace docinstruct {

namespace {

constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "k", "l", "m",
                                   "n", "p", "r", "s", "t", "v", "w", "z", "br",
                                   "st", "tr", "pl", "gr", "sh", "th"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
constexpr const char* kCodas[] = {"", "", "n", "r", "s", "l", "m", "t", "nd"};

std::uint64_t reply_seed(std::uint64_t seed, const ChatRequest& req) {
  std::uint64_t h = fnv1a64(req.request_tag, seed);
  h = fnv1a64(req.prompt, h);
  return mix64(h ^ static_cast<std::uint64_t>(req.sample_index));
}

}  // namespace

MockBackend::MockBackend(MockOptions options) : options_(options) {
  if (options_.embed_dim == 0) throw ConfigError("mock embed_dim must be > 0");
  if (options_.min_words == 0 || options_.min_words > options_.max_words) {
    throw ConfigError("mock sentence length bounds invalid");
  }
}

void MockBackend::add_canned(const std::string& tag, const std::string& prompt,
                             std::string reply) {
  std::lock_guard lock(mu_);
  canned_[{tag, sha256_hex(prompt)}] = std::move(reply);
}

void MockBackend::set_tag_choices(const std::string& tag,
                                  std::vector<std::string> choices) {
  std::lock_guard lock(mu_);
  choices_[tag] = std::move(choices);
}

void MockBackend::set_responder(Responder responder) {
  std::lock_guard lock(mu_);
  responder_ = std::move(responder);
}

std::string MockBackend::sentence(std::uint64_t seed) const {
  Rng rng(seed);
  const std::size_t span = options_.max_words - options_.min_words + 1;
  const std::size_t n = options_.min_words + rng.below(span);
  std::string out;
  for (std::size_t w = 0; w < n; ++w) {
    if (w) out.push_back(' ');
    const std::size_t syllables = 1 + rng.below(3);
    std::string word;
    for (std::size_t s = 0; s < syllables; ++s) {
      word += kOnsets[rng.below(std::size(kOnsets))];
      word += kVowels[rng.below(std::size(kVowels))];
      word += kCodas[rng.below(std::size(kCodas))];
    }
    if (w == 0) word[0] = static_cast<char>(std::toupper(word[0]));
    out += word;
  }
  out.push_back(rng.below(2) ? '?' : '.');
  return out;
}

std::string MockBackend::complete(const ChatRequest& req) {
  Responder responder;
  {
    std::lock_guard lock(mu_);
    ++calls_[req.request_tag];
    responder = responder_;
  }
  if (responder) {
    if (auto r = responder(req)) return *r;
  }
  const std::uint64_t seed = reply_seed(options_.seed, req);
  {
    std::lock_guard lock(mu_);
    if (auto it = canned_.find({req.request_tag, sha256_hex(req.prompt)});
        it != canned_.end()) {
      return it->second;
    }
    if (auto it = choices_.find(req.request_tag);
        it != choices_.end() && !it->second.empty()) {
      return it->second[seed % it->second.size()];
    }
  }
  return sentence(seed);
}

EmbeddingVector MockBackend::embed_one(const std::string& text) const {
  EmbeddingVector v;
  v.values.assign(options_.embed_dim, 0.0);
  bool any = false;
  for (auto word : split_words(text)) {
    std::string token;
    for (char c : word) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    if (token.empty()) continue;
    const std::uint64_t h = fnv1a64(token, options_.seed);
    v.values[h % options_.embed_dim] += (h >> 63) ? -1.0 : 1.0;
    any = true;
  }
  bool nonzero = false;
  for (double x : v.values) nonzero = nonzero || x != 0.0;
  if (!any || !nonzero) {
    Rng rng(fnv1a64(text, options_.seed ^ 0x5eedULL));
    for (double& x : v.values) x = rng.uniform() * 2.0 - 1.0;
  }
  return v;
}

std::vector<EmbeddingVector> MockBackend::embed(const std::vector<std::string>& texts) {
  ++embed_calls_;
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::size_t MockBackend::call_count(const std::string& tag) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(tag);
  return it == calls_.end() ? 0 : it->second;
}

std::size_t MockBackend::total_calls() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [tag, c] : calls_) n += c;
  return n;
}

}  // namespace docinstruct
