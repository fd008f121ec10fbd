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

#include "httplib.h"

#include <cstdlib>

#include "docinstruct/gateway.hpp"
#include "docinstruct/jsonl.hpp"

namespace docinstruct {

struct HttpBackend::Impl {
  BackendConfig config;
  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // everything after the authority, no trailing '/'
  std::string api_key;

  explicit Impl(BackendConfig c) : config(std::move(c)) {
    const std::string& url = config.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw ConfigError("backend.base_url must include a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    origin = url.substr(0, path_start);
    if (path_start != std::string::npos) path_prefix = url.substr(path_start);
    while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
    if (!config.api_key_env.empty()) {
      if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
    }
  }

  std::string endpoint(const std::string& tail) const {
    // Accept base URLs given with or without the /v1 suffix.
    if (path_prefix.size() >= 3 &&
        path_prefix.compare(path_prefix.size() - 3, 3, "/v1") == 0) {
      return path_prefix + tail;
    }
    return path_prefix + "/v1" + tail;
  }

  Json post(const std::string& tail, const Json& body) {
    httplib::Client client(origin);
    const auto secs = static_cast<time_t>(config.timeout_s);
    const auto usecs = static_cast<time_t>((config.timeout_s - secs) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(endpoint(tail), headers, body.dump(), "application/json");
    if (!res) {
      throw BackendError(BackendError::Kind::kTransport, 0,
                         "transport error: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
      throw BackendError(BackendError::Kind::kServer, res->status,
                         "server error " + std::to_string(res->status));
    }
    if (res->status >= 400) {
      throw BackendError(BackendError::Kind::kClient, res->status,
                         "client error " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200));
    }
    try {
      return Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      throw BackendError(BackendError::Kind::kProtocol, res->status,
                         std::string("malformed response body: ") + e.what());
    }
  }
};

HttpBackend::HttpBackend(BackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::complete(const ChatRequest& req) {
  Json body;
  body["model"] = impl_->config.model_name;
  body["messages"] = Json::array({Json{{"role", "user"}, {"content", req.prompt}}});
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  if (req.stop) body["stop"] = *req.stop;
  Json res = impl_->post("/chat/completions", body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw BackendError(BackendError::Kind::kProtocol, 200,
                       std::string("unexpected chat response: ") + e.what());
  }
}

std::vector<EmbeddingVector> HttpBackend::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  Json body;
  body["model"] = impl_->config.embed_model_name;
  body["input"] = texts;
  Json res = impl_->post("/embeddings", body);
  try {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<char> seen(texts.size(), 0);
    const auto& data = res.at("data");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = data[i].value("index", i);
      if (idx >= texts.size() || seen[idx]) {
        throw BackendError(BackendError::Kind::kProtocol, 200, "bad embedding index");
      }
      seen[idx] = 1;
      out[idx].values = data[i].at("embedding").get<std::vector<double>>();
    }
    for (char s : seen) {
      if (!s) throw BackendError(BackendError::Kind::kProtocol, 200, "missing embedding");
    }
    return out;
  } catch (const Json::exception& e) {
    throw BackendError(BackendError::Kind::kProtocol, 200,
                       std::string("unexpected embeddings response: ") + e.what());
  }
}

}  // namespace docinstruct
