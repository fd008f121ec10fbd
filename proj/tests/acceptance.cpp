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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Runs entirely against the offline mock backend.
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "docinstruct/augment.hpp"
#include "docinstruct/pipeline.hpp"
#include "docinstruct/respond.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace docinstruct;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failure messages for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

const PromptForge& forge() {
  static const PromptForge f = PromptForge::load_default();
  return f;
}

std::vector<std::vector<std::size_t>> member_sets(const std::vector<Community>& cs) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& c : cs) out.push_back(c.member_indices);
  return out;
}

GatewayOptions quick() {
  GatewayOptions o;
  o.backoff_base_s = 0;
  o.retry_limit = 0;
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DOCINSTRUCT_CLI) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void community_oracle(Check& c) {
  std::mt19937_64 gen(2024);
  double spent = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + gen() % 499;
    const auto embs = fixtures::clustered_vectors(n, 16, gen(), 0.15 + 0.05 * double(gen() % 6));
    DiversityParams p;
    p.threshold = 0.7;
    p.min_community_size = 2;
    const auto t0 = Clock::now();
    const auto got = member_sets(detect_communities(embs, p));
    spent += seconds_since(t0);
    const auto want = oracle::communities(fixtures::raw(embs), 0.7, 2);
    c.expect(got == want, "set " + std::to_string(trial) + " (n=" + std::to_string(n) + ") differs");
  }
  c.expect(spent < 5.0, "runtime " + std::to_string(spent) + " s");
  c.note = std::to_string(spent) + " s for 50 sets";
}

void batch_invariance(Check& c) {
  const auto embs = fixtures::clustered_vectors(2000, 16, 77);
  std::optional<std::vector<std::vector<std::size_t>>> base;
  for (std::size_t b : {1, 7, 64, 1024}) {
    DiversityParams p;
    p.batch_size = b;
    const auto got = member_sets(detect_communities(embs, p));
    if (!base) base = got;
    c.expect(got == *base, "batch " + std::to_string(b) + " differs");
  }
  c.note = std::to_string(base->size()) + " communities";
}

void ucb_check(Check& c) {
  c.expect(std::abs(ucb_score({"a", 20.0, 4}, 100, 1.0) - 6.51743) <= 1e-5, "ucb(5, 4, 100, 1)");
  c.expect(ucb_score({"a", 20.0, 4}, 100, 0.0) == 5.0, "C=0 is not the mean");
  c.expect(ucb_score({"a", 3.0, 0}, 100, 1.0) == kUnselectedScore, "n=0 is not the sentinel");

  std::mt19937_64 gen(5);
  std::vector<Instruction> pool;
  for (const auto& t : fixtures::synthetic_texts(10, 3, 4, 20)) {
    pool.push_back(make_instruction(t, "", {}, 0));
  }
  BanditState st;
  register_pool(st, pool);
  std::vector<oracle::Arm> arms;
  for (const auto& in : pool) arms.push_back({in.instr_id, double(in.word_count), 0});
  std::size_t mismatches = 0;
  for (int round = 0; round < 1000; ++round) {
    const auto want = oracle::ucb_topk(arms, st.total_selections + 1, 1.0, 5);
    const auto got = select_exemplars(st, pool, 5);
    std::vector<std::string> ids;
    for (auto i : got) ids.push_back(pool[i].instr_id);
    if (ids != want) ++mismatches;
    for (auto& a : arms) {
      if (std::find(want.begin(), want.end(), a.id) != want.end()) ++a.n;
    }
    if (gen() % 2) {
      const double reward = double(3 + gen() % 30);
      for (const auto& id : want) {
        st.stats.at(id).quality_sum += reward;
        for (auto& a : arms) {
          if (a.id == id) a.quality_sum += reward;
        }
      }
      auto fresh = make_instruction("candidate " + std::to_string(round), "", {}, round);
      pool.push_back(fresh);
      st.stats.emplace(fresh.instr_id, SeedStats{fresh.instr_id, reward, 0});
      arms.push_back({fresh.instr_id, reward, 0});
    }
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " of 1000 rounds differ");
}

// Shared 500-document mock run, used by criteria 4 and 10.
struct FullRun {
  fixtures::TempDir dir{"accept-500"};
  PipelineConfig config;
  Json report;
  double wall_s = 0;
  double max_sim = 0;
  std::size_t pool_size = 0;
  std::size_t rounds = 0;
};

FullRun& full_run() {
  static FullRun run = [] {
    FullRun r;
    r.config = fixtures::mock_pipeline(r.dir.path(), 500);
    const auto t0 = Clock::now();
    Pipeline p(r.config);
    r.report = p.cmd_run();
    r.wall_s = seconds_since(t0);
    std::vector<std::string> texts;
    for (const auto& row : read_jsonl_strict(r.config.paths.workdir / "augment/pool.jsonl")) {
      texts.push_back(row.at("text").get<std::string>());
    }
    auto embs = p.gateway().embed(texts);
    for (auto& e : embs) e = normalize(e);
    r.max_sim = max_pairwise_sim(embs);
    r.pool_size = texts.size();
    const auto stats = Json::parse(read_file(r.config.paths.workdir / "augment/stats.json"));
    r.rounds = stats.at("rounds").get<std::size_t>();
    return r;
  }();
  return run;
}

void tau_invariant(Check& c) {
  auto& r = full_run();
  c.expect(r.rounds == 500, "ran " + std::to_string(r.rounds) + " rounds");
  c.expect(r.max_sim < 0.85, "max pairwise cosine " + std::to_string(r.max_sim));
  std::ostringstream os;
  os << r.pool_size << " instructions, max cosine " << r.max_sim;
  c.note = os.str();
}

void tag_grid(Check& c) {
  const fs::path golden = DOCINSTRUCT_GOLDEN_DIR;
  const auto bindings = Json::parse(read_file(golden / "bindings.json"));
  std::vector<Document> docs = {make_document(bindings.at("doc").get<std::string>(), "golden")};
  for (const auto& t : fixtures::synthetic_texts(30, 12)) docs.push_back(make_document(t, "s"));
  for (const auto& d : docs) {
    const auto grid = forge().seed_prompt_grid(d);
    c.expect(grid.size() == 80, "grid size " + std::to_string(grid.size()));
    const auto& tags = forge().tags();
    std::size_t k = 0;
    for (const auto& a : tags.difficulty) {
      for (const auto& b : tags.task_type) {
        for (const auto& s : tags.style) {
          if (k < grid.size()) {
            c.expect(grid[k].tags == TagTriple{a.name, b.name, s.name},
                     "cell " + std::to_string(k) + " out of order");
          }
          ++k;
        }
      }
    }
  }
  const auto grid = forge().seed_prompt_grid(docs[0]);
  c.expect(grid.front().prompt.text == read_file(golden / "seed_question_first.golden.txt"),
           "prompt #1 differs from golden");
  c.expect(grid.back().prompt.text == read_file(golden / "seed_question_last.golden.txt"),
           "prompt #80 differs from golden");
}

void template_fidelity(Check& c) {
  const fs::path golden = DOCINSTRUCT_GOLDEN_DIR;
  const auto all =
      Json::parse(read_file(golden / "bindings.json")).get<std::map<std::string, std::string>>();
  std::size_t checked = 0;
  for (TemplateId id : kAllTemplates) {
    const std::string name(to_string(id));
    if (id == TemplateId::kSeedQuestion) {
      const auto grid = forge().seed_prompt_grid(make_document(all.at("doc"), "golden"));
      c.expect(grid.front().prompt.text == read_file(golden / "seed_question_first.golden.txt"),
               name + " differs");
    } else {
      Bindings b;
      for (const auto& p : forge().get(id).placeholders) b[p] = all.at(p);
      c.expect(forge().render(id, b).text == read_file(golden / (name + ".golden.txt")),
               name + " differs");
    }
    ++checked;
  }
  c.expect(checked == 13, std::to_string(checked) + " templates");
}

void retention(Check& c) {
  fixtures::TempDir dir("accept-quota");
  auto config = fixtures::mock_pipeline(dir.path(), 1000, 31);
  config.diversity.retention_ratio = 0.06;
  Pipeline p(config);
  const auto r = p.cmd_prescreen();
  const auto report = Json::parse(read_file(config.paths.workdir / "prescreen/communities.json"));
  const std::size_t documents = report.at("documents").get<std::size_t>();
  const std::size_t selected = report.at("selected").get<std::size_t>();
  c.expect(documents == 1000, std::to_string(documents) + " documents reached diversity selection");
  c.expect(selected == 60, std::to_string(selected) + " survivors before the LLM screen");
  c.expect(r.accounting.drops.count("diversity") && r.accounting.drops.at("diversity") == 940,
           "diversity drop count");
  c.note = std::to_string(selected) + " of " + std::to_string(documents) + " kept, " +
           std::to_string(r.accounting.output) + " after LLM screen";
}

void determinism(Check& c) {
  fixtures::TempDir dir("accept-determinism");
  fixtures::write_corpus(dir / "corpus.jsonl", fixtures::synthetic_texts(300, 41));
  auto config_for = [&](const std::string& work) {
    const fs::path path = dir / (work + ".json");
    Json j = {{"paths", {{"corpus", "corpus.jsonl"}, {"workdir", work}}},
              {"augment", {{"rounds", 200}, {"checkpoint_interval", 50}}},
              {"workers", 4}};
    write_file_atomic(path, j.dump(2));
    return path.string();
  };
  const auto a = config_for("a"), b = config_for("b"), k = config_for("k");
  c.expect(run_cli("--config " + a + " --mock run") == 0, "first run failed");
  c.expect(run_cli("--config " + b + " --mock run") == 0, "second run failed");
  // Abandon augmentation at round 137 (last checkpoint: 100), then resume.
  c.expect(run_cli("--config " + k + " --mock run --stop-after 137") == 0, "interrupted run failed");
  c.expect(fs::exists(dir / "k/augment/checkpoint.json"), "no checkpoint after interruption");
  c.expect(!fs::exists(dir / "k/dataset.jsonl"), "dataset written by an interrupted run");
  c.expect(run_cli("--config " + k + " --mock run") == 0, "resumed run failed");
  try {
    const auto da = read_file(dir / "a/dataset.jsonl");
    c.expect(!da.empty(), "empty dataset");
    c.expect(da == read_file(dir / "b/dataset.jsonl"), "repeat run differs");
    c.expect(da == read_file(dir / "k/dataset.jsonl"), "resumed run differs");
    c.note = sha256_hex(da).substr(0, 16);
  } catch (const IoError& e) {
    c.expect(false, e.what());
  }
}

void selection_oracle(Check& c) {
  std::mt19937_64 gen(404);
  const std::vector<ResponseMode> all = {ResponseMode::kDirect, ResponseMode::kCautious,
                                         ResponseMode::kFaithful, ResponseMode::kAdaptive};
  std::size_t mismatches = 0;
  for (int set = 0; set < 100; ++set) {
    auto mock = std::make_shared<MockBackend>();
    std::map<std::string, std::string> replies;
    mock->set_responder([&](const ChatRequest& r) -> std::optional<std::string> {
      for (const auto& [text, reply] : replies) {
        if (r.prompt.find(text) != std::string::npos) return reply;
      }
      return std::nullopt;
    });
    Gateway g(mock, quick());
    ResponseSynthesizer rs(g, forge());
    auto modes = all;
    std::shuffle(modes.begin(), modes.end(), gen);
    modes.resize(2 + gen() % 3);
    std::vector<ResponseCandidate> cands;
    std::vector<std::pair<std::string, std::optional<int>>> scored;
    for (auto m : modes) {
      ResponseCandidate cand;
      cand.mode = m;
      cand.text = "reply " + std::to_string(set) + " " + std::string(to_string(m));
      std::optional<int> score;
      const int s = int(gen() % 12);
      if (s < 10) {
        score = 1 + s % 5;
        replies[cand.text] = (s >= 5 ? "Score: " : "") + std::to_string(*score);
      } else {
        replies[cand.text] = "I cannot rate this";
      }
      scored.emplace_back(std::string(to_string(m)), score);
      cands.push_back(cand);
    }
    const auto want = oracle::pick_response(scored);
    const auto got = rs.select_response(make_instruction("Explain tides.", "", {}, 0), cands);
    const bool same = got.has_value() == want.has_value() &&
                      (!got || std::string(to_string(got->mode)) == *want);
    if (!same) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
}

void throughput(Check& c) {
  auto& r = full_run();
  c.expect(r.report.value("status", "") == "complete", "pipeline did not complete");
  c.expect(r.wall_s < 60.0, "pipeline took " + std::to_string(r.wall_s) + " s");
  const auto embs = fixtures::clustered_vectors(30000, 384, 8, 0.3);
  const auto t0 = Clock::now();
  const auto cs = detect_communities(embs, {});
  const double community_s = seconds_since(t0);
  c.expect(community_s < 300.0, "communities on 30k vectors took " + std::to_string(community_s) + " s");
  std::ostringstream os;
  os << "pipeline " << r.wall_s << " s, 30k communities " << community_s << " s (" << cs.size()
     << " found)";
  c.note = os.str();
}

// Example replies from the judge tables with the labels the tables give them.
struct Example {
  TemplateId filter;
  std::string instruction;
  std::string reply;
  int label;
};

void parsing_polarity(Check& c) {
  const std::vector<Example> examples = {
      {TemplateId::kInstrFilterTemporal, "Please analyze the recent COVID-19 outbreak.",
       "0 (Reason: recent)", 0},
      {TemplateId::kInstrFilterTemporal, "What's happening in China in September 2023?",
       "0 (Reason: in September 2023)", 0},
      {TemplateId::kInstrFilterTemporal, "Provide an account of events from last Monday night.",
       "0 (Reason: last Monday night)", 0},
      {TemplateId::kInstrFilterPrivacy, "", "0 (Reason: private information)", 0},
      {TemplateId::kInstrFilterPrivacy, "", "1 (Reason: historical)", 1},
      {TemplateId::kInstrFilterPrivacy, "", "0 (Reason: private information)", 0},
      {TemplateId::kInstrFilterLogic, "", "0", 0},
      {TemplateId::kInstrFilterLogic, "", "0", 0},
  };
  std::size_t n = 0;
  for (const auto& ex : examples) {
    const std::string& body = forge().get(ex.filter).body;
    const std::string name(to_string(ex.filter));
    c.expect(body.find("Answer: " + ex.reply) != std::string::npos,
             name + " lacks example \"" + ex.reply + "\"");
    if (!ex.instruction.empty()) {
      c.expect(body.find(ex.instruction) != std::string::npos, name + " lacks its example");
    }
    const int verdict = parse_binary_verdict(ex.reply).value;
    c.expect(verdict == ex.label, name + ": \"" + ex.reply + "\" parsed as " + std::to_string(verdict));

    // Through the filter: only the reply under test is non-good.
    auto mock = std::make_shared<MockBackend>();
    for (TemplateId f : SeedOptions{}.instruction_filters) {
      mock->set_tag_choices(std::string(to_string(f)), {f == ex.filter ? ex.reply : "1"});
    }
    Gateway g(mock, quick());
    SeedGenerator gen(g, forge());
    const bool keep = gen.filter_instruction(
        make_instruction(ex.instruction.empty() ? "Describe the example." : ex.instruction, "d", {}, 0));
    c.expect(keep == (ex.label == forge().good_verdict(ex.filter)),
             name + ": \"" + ex.reply + "\" kept=" + std::to_string(keep));
    ++n;
  }
  // Pre-screen judges answer '1' for yes (useless, private, advertising).
  for (TemplateId f : SeedOptions{}.prescreen_filters) {
    const std::string& body = forge().get(f).body;
    c.expect(body.find("'1' (yes)") != std::string::npos, std::string(to_string(f)) + " polarity text");
    for (const std::string reply : {"1", "0"}) {
      auto mock = std::make_shared<MockBackend>();
      for (TemplateId other : SeedOptions{}.prescreen_filters) {
        mock->set_tag_choices(std::string(to_string(other)), {other == f ? reply : "0"});
      }
      Gateway g(mock, quick());
      SeedGenerator gen(g, forge());
      const std::vector<Document> docs = {make_document("Some paragraph of text.", "p")};
      const bool kept = gen.prescreen_documents(docs).size() == 1;
      c.expect(kept == (reply == "0"), std::string(to_string(f)) + " reply " + reply);
      ++n;
    }
  }
  c.note = std::to_string(n) + " verdicts";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"community detection equals brute force", community_oracle},
      {"batch size invariance", batch_invariance},
      {"UCB score and selection oracle", ucb_check},
      {"tau dedup invariant after 500 rounds", tau_invariant},
      {"tag grid cardinality and order", tag_grid},
      {"template fidelity", template_fidelity},
      {"retention quota", retention},
      {"end-to-end determinism and resume", determinism},
      {"response selection oracle", selection_oracle},
      {"throughput", throughput},
      {"verdict parsing polarity", parsing_polarity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check check;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = check.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first;
    if (!check.note.empty()) std::cout << " [" << check.note << "]";
    std::cout << " (" << seconds_since(t0) << " s)\n";
    for (const auto& f : check.failures) std::cout << "    " << f << "\n";
    std::cout.flush();
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/"
            << criteria.size() << "\n";
  return failed ? 1 : 0;
}
