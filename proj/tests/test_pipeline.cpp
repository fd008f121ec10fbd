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

#include <gtest/gtest.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "docinstruct/pipeline.hpp"
#include "docinstruct/stats.hpp"
#include "fixtures.hpp"

using namespace docinstruct;
using fixtures::TempDir;

namespace {

PipelineConfig small_run(const TempDir& dir, std::size_t docs = 120) {
  auto c = fixtures::mock_pipeline(dir.path(), docs);
  // Keep enough documents that an epoch is long compared with a rejection run.
  c.diversity.retention_ratio = 0.25;
  c.augment.config.rounds = 60;
  c.augment.config.checkpoint_interval = 20;
  return c;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(DOCINSTRUCT_CLI) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void append(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::app) << s;
}

}  // namespace

TEST(Config, UnknownKeysAndRangesRejected) {
  EXPECT_THROW(config_from_json(Json{{"augment", {{"roundz", 5}}}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"response", {{"modes", {"direct", "loud"}}}}}), ConfigError);
  auto c = config_from_json(Json{{"augment", {{"tau", 1.2}}}});
  EXPECT_THROW(c.validate(false), ConfigError);
  c = config_from_json(Json{{"response", {{"modes", {"direct"}}}}});
  EXPECT_THROW(c.validate(false), ConfigError);
  EXPECT_THROW(PipelineConfig{}.validate(true), ConfigError);
  EXPECT_NO_THROW(PipelineConfig{}.validate(false));
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, PathsResolveAgainstConfigDir) {
  TempDir dir("cfg");
  write_file_atomic(dir / "c.json", R"({"paths": {"corpus": "data/x.jsonl", "workdir": "/abs/w"}})");
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.paths.corpus, dir / "data/x.jsonl");
  EXPECT_EQ(c.paths.workdir, "/abs/w");
  EXPECT_EQ(c.output_path(), std::filesystem::path("/abs/w/dataset.jsonl"));
  const auto round = config_from_json(to_json(c));
  EXPECT_EQ(to_json(round), to_json(c));
}

TEST(Overrides, ApplyToConfig) {
  PipelineConfig c;
  CliOverrides o;
  o.mock = true;
  o.limit = 7;
  o.rng_seed = 99;
  o.workdir = "/tmp/w";
  apply_overrides(c, o);
  EXPECT_TRUE(c.mock.enabled);
  EXPECT_EQ(c.seed.limit, 7u);
  EXPECT_EQ(c.seed.rng_seed, 99u);
  EXPECT_EQ(c.augment.config.rng_seed, 99u);
  EXPECT_EQ(c.paths.workdir, "/tmp/w");
}

TEST(Pipeline, EndToEndThenNoOpRerun) {
  TempDir dir("e2e");
  const auto c = small_run(dir);
  Json first;
  {
    Pipeline p(c);
    first = p.cmd_run();
  }
  EXPECT_EQ(first["status"], "complete");
  ASSERT_EQ(first["stages"].size(), 4u);
  for (const auto& s : first["stages"]) {
    EXPECT_EQ(s["status"], "ran") << s["stage"];
    const auto& acc = s["accounting"];
    std::size_t dropped = 0;
    for (const auto& [k, v] : acc["drops"].items()) dropped += v.get<std::size_t>();
    EXPECT_EQ(acc["input"].get<std::size_t>(), acc["output"].get<std::size_t>() + dropped)
        << s["stage"];
  }
  const auto dataset = read_file(c.output_path());
  EXPECT_FALSE(dataset.empty());
  EXPECT_TRUE(std::filesystem::exists(c.paths.workdir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(c.paths.workdir / "report.txt"));
  EXPECT_FALSE(std::filesystem::exists(c.paths.workdir / "augment/checkpoint.json"));

  Pipeline again(c);
  const auto second = again.cmd_run();
  for (const auto& s : second["stages"]) EXPECT_EQ(s["status"], "up_to_date") << s["stage"];
  EXPECT_EQ(read_file(c.output_path()), dataset);
  EXPECT_EQ(again.gateway().counters().chat_calls, 0u);
}

TEST(Pipeline, TamperedUpstreamIsRefused) {
  TempDir dir("tamper");
  const auto c = small_run(dir);
  {
    Pipeline p(c);
    p.cmd_prescreen();
  }
  append(c.paths.workdir / "documents.jsonl", "\n");
  Pipeline p(c);
  try {
    p.cmd_seed();
    FAIL();
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("docinstruct prescreen"), std::string::npos);
  }
}

TEST(Pipeline, MissingUpstreamIsRefused) {
  TempDir dir("missing");
  Pipeline p(small_run(dir));
  EXPECT_THROW(p.cmd_augment(), StageError);
}

TEST(Pipeline, LimitCapsSeedDocuments) {
  TempDir dir("limit");
  auto c = small_run(dir, 300);
  c.seed.limit = 2;
  Pipeline p(c);
  p.cmd_prescreen();
  const auto r = p.cmd_seed();
  EXPECT_EQ(r.accounting.input, 2u * 80u);
}

TEST(Pipeline, ConfigChangeRerunsStage) {
  TempDir dir("rerun");
  auto c = small_run(dir);
  {
    Pipeline p(c);
    p.cmd_prescreen();
  }
  c.diversity.retention_ratio = 0.2;
  Pipeline p(c);
  EXPECT_EQ(p.cmd_prescreen().status, "ran");
  EXPECT_EQ(p.cmd_prescreen().status, "up_to_date");
}

TEST(Pipeline, InterruptedAugmentResumesToSameDataset) {
  TempDir a("resume-a"), b("resume-b");
  const auto ca = small_run(a);
  {
    Pipeline p(ca);
    p.cmd_run();
  }
  const auto cb = small_run(b);
  {
    Pipeline p(cb);
    const auto r = p.cmd_run(47);
    EXPECT_EQ(r["status"], "interrupted");
  }
  EXPECT_TRUE(std::filesystem::exists(cb.paths.workdir / "augment/checkpoint.json"));
  {
    Pipeline p(cb);
    EXPECT_EQ(p.cmd_run()["status"], "complete");
  }
  EXPECT_EQ(read_file(ca.output_path()), read_file(cb.output_path()));
  EXPECT_EQ(read_file(ca.paths.workdir / "augment/audit.jsonl"),
            read_file(cb.paths.workdir / "augment/audit.jsonl"));
}

TEST(WorkdirLock, LiveOwnerBlocksStaleOwnerIsReplaced) {
  TempDir dir("lock");
  {
    WorkdirLock held(dir.path());
    EXPECT_THROW(WorkdirLock again(dir.path()), StageError);
  }
  EXPECT_FALSE(std::filesystem::exists(dir / ".lock"));

  // A pid that has certainly exited: a reaped child.
  const pid_t child = fork();
  if (child == 0) _exit(0);
  waitpid(child, nullptr, 0);
  write_file_atomic(dir / ".lock", std::to_string(child) + "\n");
  EXPECT_NO_THROW(WorkdirLock taken(dir.path()));
}

TEST(Stats, LengthSummary) {
  const std::vector<std::size_t> lens = {10, 20, 30};
  const auto s = summarize_lengths(lens);
  EXPECT_DOUBLE_EQ(s.mean, 20.0);
  EXPECT_DOUBLE_EQ(s.median, 20.0);
  EXPECT_EQ(s.max, 30u);
  const std::vector<std::size_t> even = {1, 2, 3, 10};
  EXPECT_DOUBLE_EQ(summarize_lengths(even).median, 2.5);
  EXPECT_EQ(summarize_lengths({}).count, 0u);
}

TEST(StatsProperty, HistogramConservesCount) {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> lens(1 + gen() % 300);
    for (auto& l : lens) l = gen() % 500;
    const auto s = summarize_lengths(lens);
    std::size_t total = 0;
    for (const auto& [start, n] : s.histogram) {
      EXPECT_EQ(start % 5, 0u);
      total += n;
    }
    EXPECT_EQ(total, lens.size());
  }
}

TEST(Stats, IdenticalInstructionsFormOneCommunity) {
  TempDir dir("stats");
  std::ofstream out(dir / "d.jsonl");
  for (int i = 0; i < 6; ++i) {
    out << R"({"instruction":"Explain frost.","input":"","output":"It is ice.","meta":{}})" << "\n";
  }
  out << "not json\n";
  out.close();
  Gateway g(std::make_shared<MockBackend>(), GatewayOptions{});
  const auto forge = PromptForge::load_default();
  const auto st = compute_stats(dir / "d.jsonl", g, forge);
  EXPECT_EQ(st.records, 6u);
  ASSERT_EQ(st.malformed.size(), 1u);
  EXPECT_EQ(st.malformed[0].line, 7u);
  EXPECT_EQ(st.communities, 1u);
  EXPECT_NEAR(*st.max_pairwise_sim, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(st.lengths.mean, 2.0);
  const auto j = to_json(st);
  EXPECT_TRUE(j["diversity_proxy"].contains("note"));
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("--config " + (dir / "missing.json").string() + " run"), 2);
  EXPECT_EQ(cli("--workdir " + (dir / "w").string() + " --mock seed"), 3);
  EXPECT_EQ(cli("run --bogus-flag"), 2);

  // An unreachable HTTP backend surfaces as a backend failure.
  fixtures::write_corpus(dir / "corpus.jsonl", fixtures::synthetic_texts(100, 1));
  write_file_atomic(dir / "http.json", R"({"paths": {"corpus": "corpus.jsonl", "workdir": "w2"},
    "backend": {"base_url": "http://127.0.0.1:1", "retry_limit": 0, "timeout_s": 1}})");
  EXPECT_EQ(cli("--config " + (dir / "http.json").string() + " prescreen"), 4);

  write_file_atomic(dir / "mock.json", R"({"paths": {"corpus": "corpus.jsonl", "workdir": "w3"},
    "diversity": {"retention_ratio": 0.3}, "augment": {"rounds": 10}})");
  EXPECT_EQ(cli("--config " + (dir / "mock.json").string() + " --mock run"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "w3/dataset.jsonl"));
  EXPECT_EQ(cli("--config " + (dir / "mock.json").string() + " --mock stats"), 0);
}
