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

#include "docinstruct/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <fstream>
#include <sstream>

namespace docinstruct {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string hash_json(const Json& j) { return sha256_hex(j.dump()); }

std::string hash_path(const fs::path& p) {
  if (!fs::is_directory(p)) return file_sha256(p);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), p));
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += f.generic_string() + '\0' + file_sha256(p / f) + '\n';
  return sha256_hex(acc);
}

void append_jsonl(const fs::path& path, const std::vector<Json>& rows) {
  if (rows.empty()) return;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + path.string());
  out << to_jsonl(rows);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::size_t count_lines(const fs::path& path) {
  if (!fs::exists(path)) return 0;
  const std::string s = read_file(path);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

void truncate_lines(const fs::path& path, std::size_t keep) {
  if (!fs::exists(path)) return;
  const std::string s = read_file(path);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t nl = s.find('\n', pos);
    if (nl == std::string::npos) throw IoError("augmentation audit is shorter than its checkpoint");
    pos = nl + 1;
  }
  write_file_atomic(path, s.substr(0, pos));
}

std::vector<Document> read_documents(const fs::path& path) {
  std::vector<Document> docs;
  for (const auto& j : read_jsonl_strict(path)) docs.push_back(document_from_json(j));
  return docs;
}

std::vector<Instruction> read_instructions(const fs::path& path) {
  std::vector<Instruction> out;
  for (const auto& j : read_jsonl_strict(path)) out.push_back(instruction_from_json(j));
  return out;
}

template <class T>
std::vector<Json> rows_of(const std::vector<T>& items) {
  std::vector<Json> rows;
  rows.reserve(items.size());
  for (const auto& x : items) rows.push_back(to_json(x));
  return rows;
}

Json load_state(const fs::path& path) {
  if (!fs::exists(path)) return Json{{"stages", Json::object()}};
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw StageError("run_state.json is corrupt (" + std::string(e.what()) +
                     "); delete it to start over");
  }
}

bool pid_alive(pid_t pid) { return pid > 0 && (::kill(pid, 0) == 0 || errno == EPERM); }

std::string mean_str(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

// ---- lock -------------------------------------------------------------------

WorkdirLock::WorkdirLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const bool ok = ::write(fd, pid.data(), pid.size()) == static_cast<ssize_t>(pid.size());
      ::close(fd);
      if (!ok) throw IoError("cannot write lock file " + path_.string());
      return;
    }
    if (errno != EEXIST) throw IoError("cannot create lock file " + path_.string());
    pid_t owner = 0;
    try {
      owner = static_cast<pid_t>(std::stol(read_file(path_)));
    } catch (const std::exception&) {
    }
    if (pid_alive(owner)) {
      throw StageError("work directory " + dir.string() + " is locked by running process " +
                       std::to_string(owner));
    }
    std::error_code ec;
    fs::remove(path_, ec);  // stale lock from a dead process
  }
  throw StageError("could not acquire lock " + path_.string());
}

WorkdirLock::~WorkdirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---- reports ----------------------------------------------------------------

Json to_json(const StageReport& r) {
  Json j;
  j["stage"] = r.stage;
  j["status"] = r.status;
  j["accounting"] = r.accounting.to_json();
  j["wall_s"] = r.wall_s;
  j["details"] = r.details;
  return j;
}

namespace {

StageReport stage_report_from_json(const Json& j) {
  StageReport r;
  r.stage = j.at("stage").get<std::string>();
  r.status = j.at("status").get<std::string>();
  const auto& a = j.at("accounting");
  r.accounting.input = a.at("input").get<std::size_t>();
  r.accounting.output = a.at("output").get<std::size_t>();
  for (const auto& [k, v] : a.at("drops").items()) r.accounting.drops[k] = v.get<std::size_t>();
  r.wall_s = j.value("wall_s", 0.0);
  r.details = j.value("details", Json::object());
  return r;
}

}  // namespace

std::string render_report_text(const Json& report) {
  std::ostringstream os;
  os << "status: " << report.value("status", std::string("?")) << "\n";
  for (const auto& s : report.at("stages")) {
    const auto& a = s.at("accounting");
    os << s.at("stage").get<std::string>() << " [" << s.at("status").get<std::string>()
       << "] in=" << a.at("input") << " out=" << a.at("output");
    for (const auto& [k, v] : a.at("drops").items()) os << " " << k << "=" << v;
    os << " (" << mean_str(s.at("wall_s").get<double>()) << " s)\n";
    if (auto it = s.at("details").find("retention_ratio"); it != s.at("details").end()) {
      os << "  retention ratio: " << mean_str(it->get<double>()) << "\n";
    }
  }
  if (report.contains("dataset")) {
    os << "dataset: " << report["dataset"].get<std::string>() << " ("
       << report.value("records", 0) << " records)\n";
  }
  os << "wall time: " << mean_str(report.value("wall_s", 0.0)) << " s\n";
  return os.str();
}

// ---- construction ------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const PipelineConfig& config) {
  if (!config.mock.enabled) return std::make_shared<HttpBackend>(config.backend);
  auto mock = std::make_shared<MockBackend>(config.mock.options);
  for (const auto& [tag, choices] : config.mock.replies) mock->set_tag_choices(tag, choices);
  return mock;
}

GatewayOptions gateway_options(const PipelineConfig& config) {
  GatewayOptions o;
  o.max_concurrent = config.backend.max_concurrent;
  o.retry_limit = config.backend.retry_limit;
  o.backoff_base_s = config.backend.backoff_base_s;
  o.generation_temperature = config.decoding.generation_temperature;
  o.generation_max_tokens = config.decoding.generation_max_tokens;
  o.judge_temperature = config.decoding.judge_temperature;
  o.judge_max_tokens = config.decoding.judge_max_tokens;
  o.embed_batch = config.decoding.embed_batch;
  return o;
}

PromptForge load_forge(const PipelineConfig& config) {
  return config.paths.templates.empty() ? PromptForge::load_default()
                                        : PromptForge::load(config.paths.templates);
}

void apply_overrides(PipelineConfig& config, const CliOverrides& o) {
  if (o.mock) config.mock.enabled = true;
  if (o.limit) config.seed.limit = *o.limit;
  if (o.rng_seed) {
    config.seed.rng_seed = *o.rng_seed;
    config.augment.config.rng_seed = *o.rng_seed;
  }
  if (o.workdir) config.paths.workdir = *o.workdir;
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend, std::ostream* log)
    : config_(std::move(config)), log_(log) {
  lock_ = std::make_unique<WorkdirLock>(config_.paths.workdir);
  forge_ = load_forge(config_);
  Json forge_j = Json::array();
  for (TemplateId id : kAllTemplates) {
    const auto& t = forge_.get(id);
    forge_j.push_back({std::string(to_string(id)), t.body, t.placeholders,
                       t.good_verdict ? *t.good_verdict : -1});
  }
  for (const auto* pool : {&forge_.tags().difficulty, &forge_.tags().task_type,
                           &forge_.tags().style}) {
    for (const auto& tag : *pool) forge_j.push_back({tag.name, tag.text});
  }
  templates_hash_ = hash_json(forge_j);

  backend_ = backend ? std::move(backend) : make_backend(config_);
  auto opts = gateway_options(config_);
  opts.audit_path = path("gateway_audit.jsonl");
  gateway_ = std::make_unique<Gateway>(backend_, opts);
  fs::create_directories(path("embeddings"));
  gateway_->load_embedding_cache(path("embeddings/" + std::string(config_.mock.enabled ? "mock" : "http") + ".jsonl"));
  write_file_atomic(path("effective_config.json"), to_json(config_).dump(2) + "\n");
}

Pipeline::~Pipeline() = default;

fs::path Pipeline::path(const std::string& rel) const { return config_.paths.workdir / rel; }

void Pipeline::say(const std::string& msg) {
  if (log_) *log_ << msg << std::endl;
}

void Pipeline::save_cache() {
  std::map<std::string, std::string> labels;
  if (fs::exists(path("documents.jsonl"))) {
    for (const auto& d : read_documents(path("documents.jsonl"))) {
      labels.emplace(sha256_hex(d.text), d.doc_id);
    }
  }
  gateway_->save_embedding_cache(
      path("embeddings/" + std::string(config_.mock.enabled ? "mock" : "http") + ".jsonl"),
      labels);
}

// ---- run state -----------------------------------------------------------------

std::string Pipeline::common_fingerprint() const {
  const Json c = to_json(config_);
  Json j;
  j["templates"] = templates_hash_;
  j["decoding"] = c["decoding"];
  if (config_.mock.enabled) {
    j["mock"] = c["mock"];
  } else {
    j["models"] = {config_.backend.model_name, config_.backend.embed_model_name};
  }
  return hash_json(j);
}

std::string Pipeline::fingerprint(const std::string& stage) const {
  const Json c = to_json(config_);
  Json j;
  j["common"] = common_fingerprint();
  if (stage == "prescreen") {
    j["corpus_format"] = c["paths"]["corpus_format"];
    j["segmentation"] = c["segmentation"];
    j["diversity"] = c["diversity"];
    j["prescreen"] = c["prescreen"];
  } else if (stage == "seed") {
    j["seed"] = c["seed"];
  } else if (stage == "augment") {
    j["augment"] = c["augment"];
    j["filters"] = c["seed"]["filters"];
  } else if (stage == "respond") {
    j["response"] = c["response"];
    j["output"] = c["paths"]["output"];
  }
  return hash_json(j);
}

std::optional<StageReport> Pipeline::up_to_date(const std::string& stage, const std::string& fp,
                                                const Json& inputs) {
  const Json state = load_state(path("run_state.json"));
  auto it = state["stages"].find(stage);
  if (it == state["stages"].end()) return std::nullopt;
  const Json& e = *it;
  if (e.value("fingerprint", std::string()) != fp || e.value("inputs", Json()) != inputs) {
    return std::nullopt;
  }
  for (const auto& [name, out] : e.at("outputs").items()) {
    const fs::path p = out.at("path").get<std::string>();
    if (!fs::exists(p) || file_sha256(p) != out.at("sha256").get<std::string>()) {
      return std::nullopt;
    }
  }
  StageReport r = stage_report_from_json(e.at("report"));
  r.status = "up_to_date";
  r.wall_s = 0.0;
  say("[" + stage + "] up to date, nothing to do");
  return r;
}

std::string Pipeline::verified_upstream(const std::string& stage, const std::string& output,
                                        const std::string& rerun_hint) {
  const Json state = load_state(path("run_state.json"));
  auto it = state["stages"].find(stage);
  if (it == state["stages"].end()) {
    throw StageError("stage '" + stage + "' has not completed in " + workdir().string() +
                     "; run `docinstruct " + rerun_hint + "` first");
  }
  const Json& out = it->at("outputs").at(output);
  const fs::path p = out.at("path").get<std::string>();
  if (!fs::exists(p)) {
    throw StageError("upstream artifact " + p.string() + " is missing; rerun `docinstruct " +
                     rerun_hint + "`");
  }
  const std::string h = file_sha256(p);
  if (h != out.at("sha256").get<std::string>()) {
    throw StageError("checksum mismatch for " + p.string() + ": it changed after stage '" +
                     stage + "' wrote it; rerun `docinstruct " + rerun_hint + "`");
  }
  return h;
}

void Pipeline::record(const StageReport& report, const std::string& fp, const Json& inputs,
                      const std::map<std::string, fs::path>& outputs) {
  Json state = load_state(path("run_state.json"));
  Json e;
  e["fingerprint"] = fp;
  e["inputs"] = inputs;
  Json outs = Json::object();
  for (const auto& [name, p] : outputs) {
    outs[name] = {{"path", p.string()}, {"sha256", file_sha256(p)}};
  }
  e["outputs"] = outs;
  e["report"] = to_json(report);
  state["stages"][report.stage] = e;
  Json completed = Json::array();
  for (const char* s : {"prescreen", "seed", "augment", "respond"}) {
    if (state["stages"].contains(s)) completed.push_back(s);
  }
  state["completed_stages"] = completed;
  state["rng"] = {{"seed", config_.seed.rng_seed},
                  {"augment", config_.augment.config.rng_seed},
                  {"mock", config_.mock.options.seed}};
  write_file_atomic(path("run_state.json"), state.dump(2) + "\n");
}

// ---- stages ---------------------------------------------------------------------

StageReport Pipeline::cmd_prescreen() {
  const auto t0 = Clock::now();
  if (config_.paths.corpus.empty() || !fs::exists(config_.paths.corpus)) {
    throw ConfigError("corpus not found: " + config_.paths.corpus.string());
  }
  const Json inputs = {{"corpus", hash_path(config_.paths.corpus)}};
  const std::string fp = fingerprint("prescreen");
  if (auto r = up_to_date("prescreen", fp, inputs)) return *r;

  SourceFormat format = SourceFormat::kJsonl;
  if (config_.paths.corpus_format == CorpusFormat::kTextDir ||
      (config_.paths.corpus_format == CorpusFormat::kAuto &&
       fs::is_directory(config_.paths.corpus))) {
    format = SourceFormat::kPlainTextDir;
  }
  const LoadResult loaded = load_sources(config_.paths.corpus, format);
  for (const auto& e : loaded.skipped) {
    say("[prescreen] skipped source line " + std::to_string(e.line) + ": " + e.message);
  }
  if (loaded.sources.empty()) {
    throw StageError("corpus " + config_.paths.corpus.string() + " contains no usable text");
  }

  StageReport report{"prescreen", "ran", {}, 0.0, Json::object()};
  auto& acc = report.accounting;
  std::vector<Document> docs;
  for (const auto& src : loaded.sources) {
    for (auto& d : segment(src, config_.segmentation)) {
      ++acc.input;
      if (d.kept) {
        docs.push_back(std::move(d));
      } else {
        acc.drop("undersized");
      }
    }
  }
  const std::size_t before_dedup = docs.size();
  docs = exact_dedup(docs);
  if (before_dedup != docs.size()) acc.drop("duplicate", before_dedup - docs.size());
  if (docs.empty()) throw StageError("no segment reached segmentation.min_words");

  SeedGenerator screener(*gateway_, forge_,
                         SeedOptions{config_.prescreen.filters, config_.seed.filters,
                                     config_.workers});
  Json community_report;
  auto diversity_pass = [&](std::vector<Document> in) {
    std::vector<std::string> texts;
    for (const auto& d : in) texts.push_back(d.text);
    const auto embs = gateway_->embed(texts);
    const auto communities = detect_communities(embs, config_.diversity);
    const auto keep =
        diversity_select_indices(communities, in.size(), config_.diversity.retention_ratio);
    Json cs = Json::array();
    for (const auto& c : communities) {
      Json members = Json::array();
      for (std::size_t i : c.member_indices) members.push_back(in[i].doc_id);
      cs.push_back({{"representative_doc_id", in[c.representative_index].doc_id},
                    {"size", c.size()},
                    {"member_doc_ids", members}});
    }
    community_report = {{"documents", in.size()},
                        {"threshold", config_.diversity.threshold},
                        {"min_community_size", config_.diversity.min_community_size},
                        {"retention_quota", retention_quota(in.size(), config_.diversity.retention_ratio)},
                        {"selected", keep.size()},
                        {"communities", cs}};
    std::vector<Document> out;
    for (std::size_t i : keep) out.push_back(in[i]);
    acc.drop("diversity", in.size() - out.size());
    report.details["after_diversity"] = out.size();
    say("[prescreen] diversity: " + std::to_string(in.size()) + " -> " +
        std::to_string(out.size()) + " (" + std::to_string(communities.size()) + " communities)");
    return out;
  };
  auto llm_pass = [&](std::vector<Document> in) {
    auto out = screener.prescreen_documents(in);
    for (const auto& [reason, n] : screener.prescreen_accounting().drops) acc.drop(reason, n);
    report.details["after_llm"] = out.size();
    say("[prescreen] LLM pre-screen: " + std::to_string(in.size()) + " -> " +
        std::to_string(out.size()));
    return out;
  };

  if (config_.prescreen.order == PrescreenOrder::kDiversityFirst) {
    docs = llm_pass(diversity_pass(std::move(docs)));
  } else {
    docs = llm_pass(std::move(docs));
    if (docs.empty()) throw StageError("LLM pre-screen rejected every document");
    docs = diversity_pass(std::move(docs));
  }
  acc.output = docs.size();
  report.details["sources"] = loaded.sources.size();
  report.details["skipped_source_lines"] = loaded.skipped.size();
  report.details["retention_ratio"] =
      acc.input ? static_cast<double>(acc.output) / static_cast<double>(acc.input) : 0.0;

  fs::create_directories(path("prescreen"));
  write_jsonl_atomic(path("documents.jsonl"), rows_of(docs));
  write_file_atomic(path("prescreen/communities.json"), community_report.dump(2) + "\n");
  write_jsonl_atomic(path("prescreen/audit.jsonl"), rows_of(screener.take_audit()));
  save_cache();
  report.wall_s = seconds_since(t0);
  record(report, fp, inputs,
         {{"documents", path("documents.jsonl")},
          {"communities", path("prescreen/communities.json")},
          {"audit", path("prescreen/audit.jsonl")}});
  return report;
}

StageReport Pipeline::cmd_seed() {
  const auto t0 = Clock::now();
  const Json inputs = {{"documents", verified_upstream("prescreen", "documents", "prescreen")}};
  const std::string fp = fingerprint("seed");
  if (auto r = up_to_date("seed", fp, inputs)) return *r;

  auto docs = read_documents(path("documents.jsonl"));
  StageReport report{"seed", "ran", {}, 0.0, Json::object()};
  report.details["documents_available"] = docs.size();
  if (config_.seed.limit && docs.size() > *config_.seed.limit) docs.resize(*config_.seed.limit);
  if (docs.empty()) throw StageError("no documents survived pre-screen; nothing to seed from");
  const std::size_t sample = std::min(config_.seed.sample_size, docs.size());
  report.details["documents_entering"] = docs.size();
  report.details["sampled_documents"] = sample;

  SeedGenerator gen(*gateway_, forge_,
                    SeedOptions{config_.prescreen.filters, config_.seed.filters, config_.workers});
  const auto seeds = gen.generate_seeds(docs, sample, config_.seed.rng_seed);
  report.accounting = gen.seed_accounting();
  say("[seed] " + std::to_string(sample) + " documents -> " +
      std::to_string(report.accounting.input) + " prompts -> " + std::to_string(seeds.size()) +
      " seed instructions");

  fs::create_directories(path("seed"));
  write_jsonl_atomic(path("seed/seeds.jsonl"), rows_of(seeds));
  write_jsonl_atomic(path("seed/filter_audit.jsonl"), rows_of(gen.take_audit()));
  report.wall_s = seconds_since(t0);
  record(report, fp, inputs,
         {{"seeds", path("seed/seeds.jsonl")}, {"filter_audit", path("seed/filter_audit.jsonl")}});
  return report;
}

StageReport Pipeline::cmd_augment(std::size_t stop_after) {
  const auto t0 = Clock::now();
  const Json inputs = {{"documents", verified_upstream("prescreen", "documents", "prescreen")},
                       {"seeds", verified_upstream("seed", "seeds", "seed")}};
  const std::string fp = fingerprint("augment");
  if (auto r = up_to_date("augment", fp, inputs)) return *r;

  const auto docs = read_documents(path("documents.jsonl"));
  auto pool = read_instructions(path("seed/seeds.jsonl"));
  const std::size_t n_seeds = pool.size();
  const auto& cfg = config_.augment.config;
  if (pool.size() < cfg.k_exemplars) {
    throw StageError("seed pool has " + std::to_string(pool.size()) +
                     " instructions; augmentation needs at least " +
                     std::to_string(cfg.k_exemplars));
  }

  fs::create_directories(path("augment"));
  const fs::path audit_path = path("augment/audit.jsonl");
  const fs::path ckpt_path = path("augment/checkpoint.json");
  BanditState state;
  state.exploration_c = config_.augment.exploration_c;
  state.rng_seed = cfg.rng_seed;
  BootstrapProgress progress;
  bool resumed = false;
  if (fs::exists(ckpt_path)) {
    const Json ck = Json::parse(read_file(ckpt_path));
    if (ck.value("fingerprint", std::string()) == fp && ck.value("inputs", Json()) == inputs) {
      pool.clear();
      for (const auto& j : ck.at("pool")) pool.push_back(instruction_from_json(j));
      state = bandit_state_from_json(ck.at("bandit"));
      progress.rounds_done = ck.at("rounds_done").get<std::size_t>();
      progress.epoch_accepts = ck.at("epoch_accepts").get<std::size_t>();
      truncate_lines(audit_path, ck.at("audit_lines").get<std::size_t>());
      resumed = true;
      say("[augment] resuming at round " + std::to_string(progress.rounds_done));
    }
  }
  if (!resumed) {
    std::error_code ec;
    fs::remove(audit_path, ec);
    fs::remove(ckpt_path, ec);
  }

  SeedGenerator filter(*gateway_, forge_,
                       SeedOptions{config_.prescreen.filters, config_.seed.filters, config_.workers});
  UcbAugmentor aug(*gateway_, forge_, filter, cfg);
  BootstrapHooks hooks;
  hooks.stop_after = stop_after;
  hooks.checkpoint = [&](const std::vector<Instruction>& p, const BanditState& s,
                         const BootstrapProgress& pr) {
    append_jsonl(audit_path, rows_of(aug.take_audit()));
    Json ck;
    ck["fingerprint"] = fp;
    ck["inputs"] = inputs;
    ck["rounds_done"] = pr.rounds_done;
    ck["epoch_accepts"] = pr.epoch_accepts;
    ck["audit_lines"] = count_lines(audit_path);
    ck["bandit"] = to_json(s);
    ck["pool"] = rows_of(p);
    write_file_atomic(ckpt_path, ck.dump() + "\n");
    save_cache();
  };

  BootstrapResult result;
  try {
    result = aug.run_bootstrap(std::move(pool), docs, state, progress, hooks);
  } catch (const PreconditionError& e) {
    throw StageError(std::string("augmentation: ") + e.what());
  }

  StageReport report{"augment", result.interrupted ? "interrupted" : "ran", {}, 0.0,
                     Json::object()};
  if (result.interrupted) {
    say("[augment] stopped after round " + std::to_string(progress.rounds_done) +
        "; rerun to resume from the last checkpoint");
    report.details["rounds_done"] = progress.rounds_done;
    report.wall_s = seconds_since(t0);
    return report;
  }

  // Accounting and growth statistics come from the full audit so that a
  // resumed run reports the same numbers as an uninterrupted one.
  auto& acc = report.accounting;
  std::map<std::size_t, std::pair<double, std::size_t>> by_block;
  for (const auto& j : read_jsonl_strict(audit_path)) {
    const auto a = augment_audit_from_json(j);
    ++acc.input;
    if (a.accepted) {
      ++acc.output;
      auto& b = by_block[(a.round - 1) / 100];
      b.first += static_cast<double>(a.candidate_words);
      ++b.second;
    } else {
      acc.drop(a.reject_reason);
    }
  }
  auto mean_words = [](auto first, auto last) {
    double sum = 0;
    std::size_t n = 0;
    for (auto it = first; it != last; ++it, ++n) sum += static_cast<double>(it->word_count);
    return n ? sum / static_cast<double>(n) : 0.0;
  };
  Json blocks = Json::array();
  for (const auto& [b, v] : by_block) {
    blocks.push_back({{"rounds", std::to_string(b * 100 + 1) + "-" + std::to_string(b * 100 + 100)},
                      {"accepted", v.second},
                      {"mean_words", v.first / static_cast<double>(v.second)}});
  }
  const auto& final_pool = result.pool;
  Json stats = {{"rounds", progress.rounds_done},
                {"seed_instructions", n_seeds},
                {"pool_size", final_pool.size()},
                {"accepted", acc.output},
                {"rejected", acc.drops},
                {"mean_words_seeds", mean_words(final_pool.begin(), final_pool.begin() + static_cast<std::ptrdiff_t>(n_seeds))},
                {"mean_words_augmented", mean_words(final_pool.begin() + static_cast<std::ptrdiff_t>(n_seeds), final_pool.end())},
                {"accepted_by_block", blocks},
                {"strategy", cfg.strategy == SelectionStrategy::kUcb ? "ucb" : "random"}};
  report.details = stats;
  say("[augment] " + std::to_string(progress.rounds_done) + " rounds, pool " +
      std::to_string(n_seeds) + " -> " + std::to_string(final_pool.size()));

  write_jsonl_atomic(path("augment/pool.jsonl"), rows_of(final_pool));
  write_file_atomic(path("augment/stats.json"), stats.dump(2) + "\n");
  std::error_code ec;
  fs::remove(ckpt_path, ec);
  save_cache();
  report.wall_s = seconds_since(t0);
  record(report, fp, inputs,
         {{"pool", path("augment/pool.jsonl")},
          {"stats", path("augment/stats.json")},
          {"audit", audit_path}});
  return report;
}

StageReport Pipeline::cmd_respond() {
  const auto t0 = Clock::now();
  const Json inputs = {{"documents", verified_upstream("prescreen", "documents", "prescreen")},
                       {"pool", verified_upstream("augment", "pool", "augment")}};
  const std::string fp = fingerprint("respond");
  if (auto r = up_to_date("respond", fp, inputs)) return *r;

  const auto docs = read_documents(path("documents.jsonl"));
  const auto pool = read_instructions(path("augment/pool.jsonl"));
  ResponseOptions opts = config_.response;
  opts.workers = config_.workers;
  ResponseSynthesizer synth(*gateway_, forge_, opts);
  const auto index = synth.build_index(docs);
  if (index.size() == 0) throw StageError("retrieval index is empty: every embedding failed");
  auto records = synth.synthesize(pool, docs, index);

  StageReport report{"respond", "ran", synth.accounting(), 0.0, Json::object()};
  std::map<std::string, std::size_t> wins;
  for (const auto& r : records) ++wins[r.meta.at("winning_mode").get<std::string>()];
  report.details["winning_modes"] = wins;
  report.details["index_size"] = index.size();
  report.details["index_omitted"] = index.omitted;
  say("[respond] " + std::to_string(pool.size()) + " instructions -> " +
      std::to_string(records.size()) + " records");

  const fs::path out = config_.output_path();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  emit_dataset(std::move(records), out);
  fs::create_directories(path("respond"));
  write_jsonl_atomic(path("respond/log.jsonl"), rows_of(synth.take_log()));
  save_cache();
  report.wall_s = seconds_since(t0);
  record(report, fp, inputs, {{"dataset", out}, {"log", path("respond/log.jsonl")}});
  return report;
}

Json Pipeline::cmd_run(std::size_t stop_after) {
  const auto t0 = Clock::now();
  Json report;
  report["stages"] = Json::array();
  bool interrupted = false;
  auto add = [&](const StageReport& r) { report["stages"].push_back(to_json(r)); };
  auto skipped = [](const char* name) {
    return StageReport{name, "skipped", {}, 0.0, Json::object()};
  };

  add(config_.stages.prescreen ? cmd_prescreen() : skipped("prescreen"));
  add(config_.stages.seed ? cmd_seed() : skipped("seed"));
  if (config_.stages.augment) {
    auto r = cmd_augment(stop_after);
    interrupted = r.status == "interrupted";
    add(r);
  } else {
    add(skipped("augment"));
  }
  if (!interrupted) {
    add(config_.stages.respond ? cmd_respond() : skipped("respond"));
    if (config_.stages.respond) {
      report["dataset"] = config_.output_path().string();
      report["records"] = count_lines(config_.output_path());
    }
  }
  const auto c = gateway_->counters();
  report["gateway"] = {{"chat_calls", c.chat_calls},     {"embed_requests", c.embed_requests},
                       {"retries", c.retries},           {"failures", c.failures},
                       {"cache_hits", c.cache_hits}};
  report["status"] = interrupted ? "interrupted" : "complete";
  report["wall_s"] = seconds_since(t0);
  write_file_atomic(path("report.json"), report.dump(2) + "\n");
  write_file_atomic(path("report.txt"), render_report_text(report));
  return report;
}

}  // namespace docinstruct
