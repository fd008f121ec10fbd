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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "docinstruct/common.hpp"
#include "docinstruct/diversity.hpp"

namespace docinstruct {

struct ChatRequest {
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 512;
  std::optional<std::vector<std::string>> stop;
  std::string request_tag;  // stage or template name, used for logs and mocks
  // Distinguishes repeated samples of one prompt. Sent to nobody; the mock
  // backend folds it into its reply seed.
  int sample_index = 0;
};

enum class ParseRule { kFirstDigit, kScale1To5 };

struct JudgeVerdict {
  std::string raw_text;
  int value = 0;
  ParseRule parse_rule = ParseRule::kFirstDigit;
};

struct BackendConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_key_env = "FANNO_API_KEY";
  std::string model_name = "mistral-7b-instruct-v0.2";
  std::string embed_model_name = "paraphrase-MiniLM-L6-v2";
  int max_concurrent = 8;
  int retry_limit = 3;
  double timeout_s = 120.0;
  double backoff_base_s = 0.5;

  void validate() const;
};

// Raised by backends. Transport failures and 5xx are retryable; 4xx is not.
class BackendError : public Error {
 public:
  enum class Kind { kTransport, kServer, kClient, kProtocol };

  BackendError(Kind kind, int status, const std::string& what)
      : Error(what), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }
  bool retryable() const {
    return kind_ == Kind::kTransport || kind_ == Kind::kServer;
  }

 private:
  Kind kind_;
  int status_;
};

// Stage-level failure after the gateway gave up on a request.
class GatewayError : public Error {
 public:
  GatewayError(std::string request_tag, int attempts, const std::string& what)
      : Error("[" + request_tag + "] " + what),
        request_tag_(std::move(request_tag)),
        attempts_(attempts) {}

  const std::string& request_tag() const { return request_tag_; }
  int attempts() const { return attempts_; }

 private:
  std::string request_tag_;
  int attempts_;
};

class VerdictParseError : public Error {
 public:
  VerdictParseError(std::string raw, ParseRule rule)
      : Error("unparseable verdict: \"" + raw + "\""),
        raw_(std::move(raw)),
        rule_(rule) {}

  const std::string& raw_text() const { return raw_; }
  ParseRule rule() const { return rule_; }

 private:
  std::string raw_;
  ParseRule rule_;
};

// First '0' or '1' in the reply.
JudgeVerdict parse_binary_verdict(const std::string& reply);
// First digit 1..5 in the reply.
JudgeVerdict parse_scale_verdict(const std::string& reply);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

// OpenAI-compatible HTTP backend (/v1/chat/completions, /v1/embeddings).
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  ~HttpBackend() override;

  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct MockOptions {
  std::uint64_t seed = 0;
  std::size_t embed_dim = 64;
  std::size_t min_words = 8;
  std::size_t max_words = 24;
};

// Deterministic offline backend. Replies resolve in this order: responder
// callback, canned (tag, sha256(prompt)) entry, per-tag choice list, then a
// pseudo-random sentence seeded by (seed, tag, prompt, sample_index).
// Embeddings are signed feature-hashed bags of lowercase words, so equal texts
// map to equal vectors and texts sharing vocabulary land close together.
class MockBackend : public Backend {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

  explicit MockBackend(MockOptions options = {});

  void add_canned(const std::string& tag, const std::string& prompt,
                  std::string reply);
  void set_tag_choices(const std::string& tag, std::vector<std::string> choices);
  void set_responder(Responder responder);

  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  std::size_t call_count(const std::string& tag) const;
  std::size_t total_calls() const;
  std::size_t embed_calls() const { return embed_calls_; }

  std::string sentence(std::uint64_t seed) const;
  EmbeddingVector embed_one(const std::string& text) const;

  const MockOptions& options() const { return options_; }

 private:
  MockOptions options_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::string> canned_;
  std::map<std::string, std::vector<std::string>> choices_;
  Responder responder_;
  std::map<std::string, std::size_t> calls_;
  std::atomic<std::size_t> embed_calls_{0};
};

// Counting semaphore bounding in-flight backend requests.
class ConcurrencyLimit {
 public:
  explicit ConcurrencyLimit(int limit) : available_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

struct GatewayOptions {
  int max_concurrent = 8;
  int retry_limit = 3;
  double backoff_base_s = 0.5;
  double generation_temperature = 0.7;
  double judge_temperature = 0.0;
  int generation_max_tokens = 512;
  int judge_max_tokens = 16;
  std::size_t embed_batch = 64;
  std::filesystem::path audit_path;  // empty: no audit log
};

struct GatewayCounters {
  std::size_t chat_calls = 0;
  std::size_t embed_requests = 0;
  std::size_t retries = 0;
  std::size_t failures = 0;
  std::size_t cache_hits = 0;
};

struct EmbeddingCacheEntry {
  std::string key;     // sha256 of the embedded text
  std::string doc_id;  // optional label
  EmbeddingVector vector;
};

// Sole boundary to generative and embedding models. Thread-safe.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayOptions options);

  std::string chat(const ChatRequest& req);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
  EmbeddingVector embed_one(const std::string& text);

  JudgeVerdict binary_judge(const std::string& prompt,
                            const std::string& request_tag = "binary_judge");
  JudgeVerdict score_judge(const std::string& prompt,
                           const std::string& request_tag = "score_judge");

  // Generation request with the configured decoding defaults.
  ChatRequest generation_request(std::string prompt, std::string tag,
                                 int sample_index = 0) const;

  GatewayCounters counters() const;
  const GatewayOptions& options() const { return options_; }

  // Embedding cache persistence (JSONL with a leading {"dim": N} header).
  void load_embedding_cache(const std::filesystem::path& path);
  void save_embedding_cache(const std::filesystem::path& path,
                            const std::map<std::string, std::string>& labels = {}) const;
  std::size_t cache_size() const;

 private:
  template <class Fn>
  auto with_retry(const std::string& tag, const std::string& prompt_hash, Fn&& fn)
      -> decltype(fn());
  void audit(const std::string& tag, const std::string& prompt_hash,
             double latency_ms, const std::string& outcome);

  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  ConcurrencyLimit limit_;

  mutable std::mutex cache_mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::size_t dim_ = 0;

  std::mutex audit_mu_;
  std::ofstream audit_out_;

  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> embed_requests_{0};
  std::atomic<std::size_t> retries_{0};
  std::atomic<std::size_t> failures_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace docinstruct
