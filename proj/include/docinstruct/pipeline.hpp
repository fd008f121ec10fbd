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

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "docinstruct/config.hpp"

namespace docinstruct {

// Single-owner lock on a work directory. The file holds the owner's pid; a
// lock left behind by a dead process is taken over.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& dir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct StageReport {
  std::string stage;
  std::string status;  // ran | up_to_date | interrupted | skipped
  StageAccounting accounting;
  double wall_s = 0.0;
  Json details = Json::object();
};
Json to_json(const StageReport& r);

// Backend selected by the config: the offline mock or the HTTP client.
std::shared_ptr<Backend> make_backend(const PipelineConfig& config);
GatewayOptions gateway_options(const PipelineConfig& config);
PromptForge load_forge(const PipelineConfig& config);

// Stage orchestration inside one work directory. Each stage records a
// fingerprint of its config slice and the hashes of its inputs and outputs in
// run_state.json; an unchanged rerun is a no-op and a modified upstream
// artifact is refused.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend = nullptr,
           std::ostream* log = nullptr);
  ~Pipeline();

  StageReport cmd_prescreen();
  StageReport cmd_seed();
  // stop_after > 0 abandons augmentation after that many rounds.
  StageReport cmd_augment(std::size_t stop_after = 0);
  StageReport cmd_respond();

  // All enabled stages in order, then report.json and report.txt.
  Json cmd_run(std::size_t stop_after = 0);

  const PipelineConfig& config() const { return config_; }
  Gateway& gateway() { return *gateway_; }
  std::filesystem::path workdir() const { return config_.paths.workdir; }

 private:
  std::filesystem::path path(const std::string& rel) const;
  std::string common_fingerprint() const;
  std::string fingerprint(const std::string& stage) const;
  std::optional<StageReport> up_to_date(const std::string& stage,
                                        const std::string& fp, const Json& inputs);
  std::string verified_upstream(const std::string& stage, const std::string& output,
                                const std::string& rerun_hint);
  void record(const StageReport& report, const std::string& fp, const Json& inputs,
              const std::map<std::string, std::filesystem::path>& outputs);
  void save_cache();
  void say(const std::string& msg);

  PipelineConfig config_;
  std::unique_ptr<WorkdirLock> lock_;
  std::shared_ptr<Backend> backend_;
  std::unique_ptr<Gateway> gateway_;
  PromptForge forge_;
  std::string templates_hash_;
  std::ostream* log_;
};

// Applies the global command-line overrides.
struct CliOverrides {
  bool mock = false;
  std::optional<std::size_t> limit;
  std::optional<std::uint64_t> rng_seed;
  std::optional<std::filesystem::path> workdir;
};
void apply_overrides(PipelineConfig& config, const CliOverrides& o);

std::string render_report_text(const Json& report);

}  // namespace docinstruct
