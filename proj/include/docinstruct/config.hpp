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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "docinstruct/augment.hpp"
#include "docinstruct/respond.hpp"

namespace docinstruct {

enum class PrescreenOrder { kDiversityFirst, kLlmFirst };
enum class CorpusFormat { kAuto, kJsonl, kTextDir };

struct PathsConfig {
  std::filesystem::path corpus;
  CorpusFormat corpus_format = CorpusFormat::kAuto;
  std::filesystem::path workdir = "work";
  std::filesystem::path output;     // empty: <workdir>/dataset.jsonl
  std::filesystem::path templates;  // empty: bundled assets
};

struct MockConfig {
  bool enabled = false;
  MockOptions options;
  // Reply choices per request tag; judges need parseable replies offline.
  std::map<std::string, std::vector<std::string>> replies;
};

struct DecodingConfig {
  double generation_temperature = 0.7;
  int generation_max_tokens = 512;
  double judge_temperature = 0.0;
  int judge_max_tokens = 16;
  std::size_t embed_batch = 64;
};

struct PrescreenConfig {
  PrescreenOrder order = PrescreenOrder::kDiversityFirst;
  std::vector<TemplateId> filters = SeedOptions{}.prescreen_filters;
};

struct SeedConfig {
  std::size_t sample_size = 200;
  std::uint64_t rng_seed = 42;
  std::vector<TemplateId> filters = SeedOptions{}.instruction_filters;
  std::optional<std::size_t> limit;  // cap on documents entering the stage
};

struct AugmentSection {
  AugmentConfig config;
  double exploration_c = 1.0;
};

struct StageToggles {
  bool prescreen = true;
  bool seed = true;
  bool augment = true;
  bool respond = true;
};

struct PipelineConfig {
  PathsConfig paths;
  BackendConfig backend;
  MockConfig mock;
  DecodingConfig decoding;
  SegmentationPolicy segmentation;
  DiversityParams diversity;
  PrescreenConfig prescreen;
  SeedConfig seed;
  AugmentSection augment;
  ResponseOptions response;
  StageToggles stages;
  std::size_t workers = 8;

  // Throws ConfigError on any out-of-range field. With require_corpus, the
  // corpus path must exist.
  void validate(bool require_corpus = true) const;

  std::filesystem::path output_path() const;
};

// Relative paths resolve against `base_dir`. Unknown keys are rejected.
PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
Json to_json(const PipelineConfig& config);

// Replies used by the offline backend unless the config overrides a tag.
std::map<std::string, std::vector<std::string>> default_mock_replies();

}  // namespace docinstruct
