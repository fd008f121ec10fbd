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

#include "docinstruct/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "docinstruct/jsonl.hpp"

namespace docinstruct {

void BackendConfig::validate() const {
  if (max_concurrent < 1) throw ConfigError("backend.max_concurrent must be >= 1");
  if (retry_limit < 0) throw ConfigError("backend.retry_limit must be >= 0");
  if (!(timeout_s > 0)) throw ConfigError("backend.timeout_s must be > 0");
  if (backoff_base_s < 0) throw ConfigError("backend.backoff_base_s must be >= 0");
}

JudgeVerdict parse_binary_verdict(const std::string& reply) {
  auto pos = reply.find_first_of("01");
  if (pos == std::string::npos) {
    throw VerdictParseError(reply, ParseRule::kFirstDigit);
  }
  return {reply, reply[pos] - '0', ParseRule::kFirstDigit};
}

JudgeVerdict parse_scale_verdict(const std::string& reply) {
  auto pos = reply.find_first_of("12345");
  if (pos == std::string::npos) {
    throw VerdictParseError(reply, ParseRule::kScale1To5);
  }
  return {reply, reply[pos] - '0', ParseRule::kScale1To5};
}

void ConcurrencyLimit::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void ConcurrencyLimit::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

namespace {

struct SlotGuard {
  explicit SlotGuard(ConcurrencyLimit& l) : limit(l) { limit.acquire(); }
  ~SlotGuard() { limit.release(); }
  ConcurrencyLimit& limit;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3)
     << std::setfill('0') << ms.count() << 'Z';
  return ss.str();
}

}  // namespace

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      limit_(std::max(1, options_.max_concurrent)) {
  if (!backend_) throw ConfigError("gateway requires a backend");
  if (!options_.audit_path.empty()) {
    if (options_.audit_path.has_parent_path()) {
      std::filesystem::create_directories(options_.audit_path.parent_path());
    }
    audit_out_.open(options_.audit_path, std::ios::app);
    if (!audit_out_) throw IoError("cannot open audit log " + options_.audit_path.string());
  }
}

void Gateway::audit(const std::string& tag, const std::string& prompt_hash,
                    double latency_ms, const std::string& outcome) {
  if (!audit_out_.is_open()) return;
  Json j;
  j["timestamp"] = utc_timestamp();
  j["request_tag"] = tag;
  j["prompt_hash"] = prompt_hash;
  j["latency_ms"] = std::round(latency_ms * 1000.0) / 1000.0;
  j["outcome"] = outcome;
  std::lock_guard lock(audit_mu_);
  audit_out_ << j.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
  audit_out_.flush();
}

template <class Fn>
auto Gateway::with_retry(const std::string& tag, const std::string& prompt_hash,
                         Fn&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
      return std::chrono::duration<double, std::milli>(
                 std::chrono::steady_clock::now() - t0)
          .count();
    };
    try {
      SlotGuard slot(limit_);
      auto result = fn();
      audit(tag, prompt_hash, elapsed_ms(), attempt == 0 ? "ok" : "ok_after_retry");
      return result;
    } catch (const BackendError& e) {
      audit(tag, prompt_hash, elapsed_ms(), std::string("error: ") + e.what());
      if (!e.retryable() || attempt >= options_.retry_limit) {
        ++failures_;
        throw GatewayError(tag, attempt + 1, e.what());
      }
      ++retries_;
      const double delay = options_.backoff_base_s * std::ldexp(1.0, attempt);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
}

std::string Gateway::chat(const ChatRequest& req) {
  if (req.prompt.empty()) {
    throw PreconditionError("chat: prompt must be non-empty");
  }
  ++chat_calls_;
  const std::string hash = sha256_hex(req.prompt).substr(0, 16);
  return with_retry(req.request_tag, hash, [&] { return backend_->complete(req); });
}

ChatRequest Gateway::generation_request(std::string prompt, std::string tag,
                                        int sample_index) const {
  ChatRequest req;
  req.prompt = std::move(prompt);
  req.request_tag = std::move(tag);
  req.temperature = options_.generation_temperature;
  req.max_tokens = options_.generation_max_tokens;
  req.sample_index = sample_index;
  return req;
}

JudgeVerdict Gateway::binary_judge(const std::string& prompt,
                                   const std::string& request_tag) {
  ChatRequest req;
  req.prompt = prompt;
  req.request_tag = request_tag;
  req.temperature = options_.judge_temperature;
  req.max_tokens = options_.judge_max_tokens;
  return parse_binary_verdict(chat(req));
}

JudgeVerdict Gateway::score_judge(const std::string& prompt,
                                  const std::string& request_tag) {
  ChatRequest req;
  req.prompt = prompt;
  req.request_tag = request_tag;
  req.temperature = options_.judge_temperature;
  req.max_tokens = options_.judge_max_tokens;
  return parse_scale_verdict(chat(req));
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  for (const auto& t : texts) {
    if (t.empty()) throw PreconditionError("embed: texts must be non-empty");
    keys.push_back(sha256_hex(t));
  }

  std::vector<std::size_t> misses;
  {
    std::lock_guard lock(cache_mu_);
    std::unordered_set<std::string> pending;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (cache_.count(keys[i])) {
        ++cache_hits_;
      } else if (pending.insert(keys[i]).second) {
        misses.push_back(i);
      }
    }
  }

  const std::size_t batch = std::max<std::size_t>(1, options_.embed_batch);
  for (std::size_t b = 0; b < misses.size(); b += batch) {
    std::vector<std::string> chunk;
    const std::size_t e = std::min(misses.size(), b + batch);
    for (std::size_t i = b; i < e; ++i) chunk.push_back(texts[misses[i]]);
    ++embed_requests_;
    auto vecs = with_retry("embed", keys[misses[b]].substr(0, 16),
                           [&] { return backend_->embed(chunk); });
    if (vecs.size() != chunk.size()) {
      ++failures_;
      throw GatewayError("embed", 1,
                         "backend returned " + std::to_string(vecs.size()) +
                             " vectors for " + std::to_string(chunk.size()) + " texts");
    }
    std::lock_guard lock(cache_mu_);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (dim_ == 0) dim_ = vecs[i].dim();
      if (vecs[i].dim() != dim_ || dim_ == 0) {
        ++failures_;
        throw GatewayError("embed", 1, "inconsistent embedding dimension");
      }
      cache_.emplace(keys[misses[b + i]], std::move(vecs[i]));
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::lock_guard lock(cache_mu_);
  for (const auto& k : keys) out.push_back(cache_.at(k));
  return out;
}

EmbeddingVector Gateway::embed_one(const std::string& text) {
  return embed({text}).front();
}

GatewayCounters Gateway::counters() const {
  return {chat_calls_.load(), embed_requests_.load(), retries_.load(),
          failures_.load(), cache_hits_.load()};
}

std::size_t Gateway::cache_size() const {
  std::lock_guard lock(cache_mu_);
  return cache_.size();
}

void Gateway::load_embedding_cache(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  auto rows = read_jsonl_strict(path);
  if (rows.empty()) return;
  const std::size_t dim = rows.front().at("dim").get<std::size_t>();
  std::lock_guard lock(cache_mu_);
  if (dim_ != 0 && dim_ != dim) {
    throw IoError("embedding cache dim " + std::to_string(dim) +
                  " does not match gateway dim " + std::to_string(dim_));
  }
  dim_ = dim;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EmbeddingVector v{rows[i].at("vector").get<std::vector<double>>()};
    if (v.dim() != dim) throw IoError("embedding cache row with wrong dim");
    cache_.emplace(rows[i].at("key").get<std::string>(), std::move(v));
  }
}

void Gateway::save_embedding_cache(
    const std::filesystem::path& path,
    const std::map<std::string, std::string>& labels) const {
  std::vector<Json> rows;
  std::lock_guard lock(cache_mu_);
  Json header;
  header["dim"] = dim_;
  rows.push_back(header);
  std::vector<const std::pair<const std::string, EmbeddingVector>*> entries;
  for (const auto& kv : cache_) entries.push_back(&kv);
  std::sort(entries.begin(), entries.end(),
            [](auto* a, auto* b) { return a->first < b->first; });
  for (const auto* kv : entries) {
    Json j;
    auto it = labels.find(kv->first);
    j["doc_id"] = it == labels.end() ? std::string{} : it->second;
    j["key"] = kv->first;
    j["vector"] = kv->second.values;
    rows.push_back(std::move(j));
  }
  write_jsonl_atomic(path, rows);
}

}  // namespace docinstruct
