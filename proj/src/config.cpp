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

#include "docinstruct/config.hpp"

#include <set>

namespace docinstruct {

namespace fs = std::filesystem;

namespace {

// Reads one JSON object, remembering which keys were consumed so that typos
// surface as errors instead of silently falling back to defaults.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    return Section(*it, where(key));
  }

  const Json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key " + where(k));
    }
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<TemplateId> template_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of template names");
  std::vector<TemplateId> out;
  for (const auto& e : j) {
    auto id = e.is_string() ? template_id_from_string(e.get<std::string>()) : std::nullopt;
    if (!id) throw ConfigError(where + ": unknown template " + e.dump());
    out.push_back(*id);
  }
  return out;
}

Json template_names(const std::vector<TemplateId>& ids) {
  Json a = Json::array();
  for (auto id : ids) a.push_back(std::string(to_string(id)));
  return a;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

std::map<std::string, std::vector<std::string>> default_mock_replies() {
  return {
      {"prescreen_useless", {"0", "0", "0 (Reason: informative)", "0", "1 (Reason: meaningless)"}},
      {"prescreen_privacy", {"0", "0", "0", "0 (Reason: no personal data)", "1 (Reason: phone number)"}},
      {"prescreen_ad", {"0", "0", "0 (Reason: encyclopedic)", "0", "1 (Reason: advertisement)"}},
      {"instr_filter_temporal", {"1", "1", "1 (Reason: timeless)", "1", "0 (Reason: recent)"}},
      {"instr_filter_privacy", {"1", "1", "1", "1 (Reason: public facts)", "0 (Reason: private)"}},
      {"instr_filter_logic", {"1", "1", "1 (Reason: coherent)", "1", "0 (Reason: illogical)"}},
      {"faithfulness_eval", {"Score: 5", "Score: 4", "4", "Score: 3", "2"}},
      {"quality_scorer", {"3", "4", "5", "2"}},
      {"complexity_scorer", {"2", "3", "4", "5"}},
  };
}

void PipelineConfig::validate(bool require_corpus) const {
  if (require_corpus) {
    require(!paths.corpus.empty(), "paths.corpus is required");
    require(fs::exists(paths.corpus), "paths.corpus does not exist: " + paths.corpus.string());
  }
  require(!paths.workdir.empty(), "paths.workdir must not be empty");
  if (!paths.templates.empty()) {
    require(fs::is_directory(paths.templates),
            "paths.templates is not a directory: " + paths.templates.string());
  }
  try {
    backend.validate();
    segmentation.validate();
    diversity.validate();
    augment.config.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  require(mock.options.embed_dim > 0, "mock.embed_dim must be > 0");
  require(mock.options.min_words > 0 && mock.options.min_words <= mock.options.max_words,
          "mock.min_words must be in [1, mock.max_words]");
  require(decoding.generation_temperature >= 0.0 && decoding.generation_temperature <= 2.0,
          "decoding.generation_temperature must be in [0, 2]");
  require(decoding.judge_temperature >= 0.0 && decoding.judge_temperature <= 2.0,
          "decoding.judge_temperature must be in [0, 2]");
  require(decoding.generation_max_tokens > 0 && decoding.judge_max_tokens > 0,
          "decoding max_tokens must be > 0");
  require(decoding.embed_batch > 0, "decoding.embed_batch must be > 0");
  require(seed.sample_size > 0, "seed.sample_size must be > 0");
  require(!seed.limit || *seed.limit > 0, "seed.limit must be > 0");
  require(augment.exploration_c >= 0.0, "augment.exploration_c must be >= 0");
  require(response.top_m >= 1, "response.top_m must be >= 1");
  require(response.modes.size() >= 2, "response.modes needs at least two modes");
  std::set<ResponseMode> modes(response.modes.begin(), response.modes.end());
  require(modes.size() == response.modes.size(), "response.modes has duplicates");
  require(workers >= 1 && workers <= 256, "workers must be in [1, 256]");
}

fs::path PipelineConfig::output_path() const {
  return paths.output.empty() ? paths.workdir / "dataset.jsonl" : paths.output;
}

PipelineConfig config_from_json(const Json& j, const fs::path& base_dir) {
  PipelineConfig c;
  Section root(j, "");

  if (auto s = root.child("paths")) {
    std::string corpus, workdir, output, templates, format;
    s->get("corpus", corpus);
    s->get("workdir", workdir);
    s->get("output", output);
    s->get("templates", templates);
    s->get("corpus_format", format);
    s->finish();
    if (!corpus.empty()) c.paths.corpus = resolve(corpus, base_dir);
    if (!workdir.empty()) c.paths.workdir = resolve(workdir, base_dir);
    if (!output.empty()) c.paths.output = resolve(output, base_dir);
    if (!templates.empty()) c.paths.templates = resolve(templates, base_dir);
    if (format == "jsonl") {
      c.paths.corpus_format = CorpusFormat::kJsonl;
    } else if (format == "text_dir") {
      c.paths.corpus_format = CorpusFormat::kTextDir;
    } else if (!format.empty() && format != "auto") {
      throw ConfigError("paths.corpus_format must be auto, jsonl or text_dir");
    }
  }

  if (auto s = root.child("backend")) {
    auto& b = c.backend;
    s->get("base_url", b.base_url);
    s->get("api_key_env", b.api_key_env);
    s->get("model_name", b.model_name);
    s->get("embed_model_name", b.embed_model_name);
    s->get("max_concurrent", b.max_concurrent);
    s->get("retry_limit", b.retry_limit);
    s->get("timeout_s", b.timeout_s);
    s->get("backoff_base_s", b.backoff_base_s);
    s->finish();
  }

  c.mock.replies = default_mock_replies();
  if (auto s = root.child("mock")) {
    s->get("enabled", c.mock.enabled);
    s->get("seed", c.mock.options.seed);
    s->get("embed_dim", c.mock.options.embed_dim);
    s->get("min_words", c.mock.options.min_words);
    s->get("max_words", c.mock.options.max_words);
    std::map<std::string, std::vector<std::string>> replies;
    s->get("replies", replies);
    for (auto& [tag, choices] : replies) c.mock.replies[tag] = std::move(choices);
    s->finish();
  }

  if (auto s = root.child("decoding")) {
    auto& d = c.decoding;
    s->get("generation_temperature", d.generation_temperature);
    s->get("generation_max_tokens", d.generation_max_tokens);
    s->get("judge_temperature", d.judge_temperature);
    s->get("judge_max_tokens", d.judge_max_tokens);
    s->get("embed_batch", d.embed_batch);
    s->finish();
  }

  if (auto s = root.child("segmentation")) {
    auto& p = c.segmentation;
    std::string split;
    s->get("min_words", p.min_words);
    s->get("max_words", p.max_words);
    s->get("window_words", p.window_words);
    s->get("split_on", split);
    s->finish();
    if (split == "sliding_window") {
      p.split_on = SplitMode::kSlidingWindow;
    } else if (!split.empty() && split != "paragraph") {
      throw ConfigError("segmentation.split_on must be paragraph or sliding_window");
    }
  }

  if (auto s = root.child("diversity")) {
    auto& d = c.diversity;
    s->get("threshold", d.threshold);
    s->get("min_community_size", d.min_community_size);
    s->get("batch_size", d.batch_size);
    s->get("retention_ratio", d.retention_ratio);
    s->finish();
  }

  if (auto s = root.child("prescreen")) {
    std::string order;
    s->get("order", order);
    if (const Json* f = s->raw("filters")) c.prescreen.filters = template_list(*f, "prescreen.filters");
    s->finish();
    if (order == "llm_first") {
      c.prescreen.order = PrescreenOrder::kLlmFirst;
    } else if (!order.empty() && order != "diversity_first") {
      throw ConfigError("prescreen.order must be diversity_first or llm_first");
    }
  }

  if (auto s = root.child("seed")) {
    s->get("sample_size", c.seed.sample_size);
    s->get("rng_seed", c.seed.rng_seed);
    std::size_t limit = 0;
    s->get("limit", limit);
    if (limit > 0) c.seed.limit = limit;
    if (const Json* f = s->raw("filters")) c.seed.filters = template_list(*f, "seed.filters");
    s->finish();
  }

  if (auto s = root.child("augment")) {
    auto& a = c.augment.config;
    std::string strategy;
    s->get("k_exemplars", a.k_exemplars);
    s->get("tau", a.tau);
    s->get("rounds", a.rounds);
    s->get("target_pool_size", a.target_pool_size);
    s->get("calls_per_round", a.calls_per_round);
    s->get("checkpoint_interval", a.checkpoint_interval);
    s->get("command", a.command);
    s->get("rng_seed", a.rng_seed);
    s->get("exploration_c", c.augment.exploration_c);
    s->get("strategy", strategy);
    std::string quality;
    s->get("quality_measure", quality);
    s->finish();
    if (strategy == "random") {
      a.strategy = SelectionStrategy::kRandom;
    } else if (!strategy.empty() && strategy != "ucb") {
      throw ConfigError("augment.strategy must be ucb or random");
    }
    if (!quality.empty() && quality != "word_count") {
      throw ConfigError("augment.quality_measure must be word_count");
    }
  }

  if (auto s = root.child("response")) {
    auto& r = c.response;
    s->get("top_m", r.top_m);
    s->get("include_origin_doc", r.include_origin_doc);
    std::vector<std::string> modes;
    s->get("modes", modes);
    std::string tie_rule;
    s->get("tie_rule", tie_rule);
    s->finish();
    if (!modes.empty()) {
      r.modes.clear();
      for (const auto& m : modes) {
        auto mode = response_mode_from_string(m);
        if (!mode) throw ConfigError("response.modes: unknown mode " + m);
        r.modes.push_back(*mode);
      }
    }
    if (!tie_rule.empty() && tie_rule != "prefer_direct") {
      throw ConfigError("response.tie_rule must be prefer_direct");
    }
  }

  if (auto s = root.child("stages")) {
    s->get("prescreen", c.stages.prescreen);
    s->get("seed", c.stages.seed);
    s->get("augment", c.stages.augment);
    s->get("respond", c.stages.respond);
    s->finish();
  }

  root.get("workers", c.workers);
  root.finish();
  c.response.workers = c.workers;
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

Json to_json(const PipelineConfig& c) {
  Json j;
  const char* formats[] = {"auto", "jsonl", "text_dir"};
  j["paths"] = {{"corpus", c.paths.corpus.string()},
                {"corpus_format", formats[static_cast<int>(c.paths.corpus_format)]},
                {"workdir", c.paths.workdir.string()},
                {"output", c.output_path().string()},
                {"templates", c.paths.templates.string()}};
  j["backend"] = {{"base_url", c.backend.base_url},
                  {"api_key_env", c.backend.api_key_env},
                  {"model_name", c.backend.model_name},
                  {"embed_model_name", c.backend.embed_model_name},
                  {"max_concurrent", c.backend.max_concurrent},
                  {"retry_limit", c.backend.retry_limit},
                  {"timeout_s", c.backend.timeout_s},
                  {"backoff_base_s", c.backend.backoff_base_s}};
  Json replies = Json::object();
  for (const auto& [tag, choices] : c.mock.replies) replies[tag] = choices;
  j["mock"] = {{"enabled", c.mock.enabled},
               {"seed", c.mock.options.seed},
               {"embed_dim", c.mock.options.embed_dim},
               {"min_words", c.mock.options.min_words},
               {"max_words", c.mock.options.max_words},
               {"replies", replies}};
  j["decoding"] = {{"generation_temperature", c.decoding.generation_temperature},
                   {"generation_max_tokens", c.decoding.generation_max_tokens},
                   {"judge_temperature", c.decoding.judge_temperature},
                   {"judge_max_tokens", c.decoding.judge_max_tokens},
                   {"embed_batch", c.decoding.embed_batch}};
  j["segmentation"] = {
      {"min_words", c.segmentation.min_words},
      {"max_words", c.segmentation.max_words},
      {"split_on",
       c.segmentation.split_on == SplitMode::kParagraph ? "paragraph" : "sliding_window"},
      {"window_words", c.segmentation.window_words}};
  j["diversity"] = {{"threshold", c.diversity.threshold},
                    {"min_community_size", c.diversity.min_community_size},
                    {"batch_size", c.diversity.batch_size},
                    {"retention_ratio", c.diversity.retention_ratio}};
  j["prescreen"] = {
      {"order",
       c.prescreen.order == PrescreenOrder::kDiversityFirst ? "diversity_first" : "llm_first"},
      {"filters", template_names(c.prescreen.filters)}};
  j["seed"] = {{"sample_size", c.seed.sample_size},
               {"rng_seed", c.seed.rng_seed},
               {"limit", c.seed.limit ? Json(*c.seed.limit) : Json(nullptr)},
               {"filters", template_names(c.seed.filters)}};
  const auto& a = c.augment.config;
  j["augment"] = {{"k_exemplars", a.k_exemplars},
                  {"tau", a.tau},
                  {"rounds", a.rounds},
                  {"target_pool_size", a.target_pool_size},
                  {"calls_per_round", a.calls_per_round},
                  {"checkpoint_interval", a.checkpoint_interval},
                  {"strategy", a.strategy == SelectionStrategy::kUcb ? "ucb" : "random"},
                  {"quality_measure", "word_count"},
                  {"command", a.command},
                  {"rng_seed", a.rng_seed},
                  {"exploration_c", c.augment.exploration_c}};
  Json modes = Json::array();
  for (auto m : c.response.modes) modes.push_back(std::string(to_string(m)));
  j["response"] = {{"top_m", c.response.top_m},
                   {"modes", modes},
                   {"include_origin_doc", c.response.include_origin_doc},
                   {"tie_rule", "prefer_direct"}};
  j["stages"] = {{"prescreen", c.stages.prescreen},
                 {"seed", c.stages.seed},
                 {"augment", c.stages.augment},
                 {"respond", c.stages.respond}};
  j["workers"] = c.workers;
  return j;
}

}  // namespace docinstruct
