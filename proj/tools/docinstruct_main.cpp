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

#include <iostream>

#include "CLI11.hpp"
#include "docinstruct/pipeline.hpp"
#include "docinstruct/stats.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kStage = 3, kBackend = 4 };

using namespace docinstruct;

int run(int argc, char** argv) {
  CLI::App app{"Document-grounded instruction dataset generator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  CliOverrides overrides;
  std::size_t stop_after = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  app.add_flag("--mock", overrides.mock, "Use the deterministic offline backend");
  app.add_option("--limit", overrides.limit, "Cap documents entering the seed stage")
      ->check(CLI::PositiveNumber);
  app.add_option("--rng-seed", overrides.rng_seed, "Seed for sampling and augmentation");
  app.add_option("--workdir", overrides.workdir, "Work directory for stage artifacts");
  app.add_flag("-q,--quiet", quiet, "Only print results");

  auto* prescreen = app.add_subcommand("prescreen", "Segment, diversity-select and screen the corpus");
  auto* seed = app.add_subcommand("seed", "Generate the seed instruction pool");
  auto* augment = app.add_subcommand("augment", "Grow the pool by bootstrapped augmentation");
  auto* respond = app.add_subcommand("respond", "Generate, judge and emit responses");
  auto* run_all = app.add_subcommand("run", "Run every enabled stage");
  for (auto* sub : {augment, run_all}) {
    sub->add_option("--stop-after", stop_after,
                    "Abandon augmentation after N rounds, as if killed (resume by rerunning)");
  }
  auto* stats = app.add_subcommand("stats", "Analyse a dataset file");
  std::string dataset;
  std::string stats_out;
  bool scorers = false;
  bool as_json = false;
  stats->add_option("dataset", dataset, "Dataset JSONL (default: the configured output)");
  stats->add_flag("--scorers", scorers, "Also run the quality and complexity scorers");
  stats->add_flag("--json", as_json, "Print JSON instead of text");
  stats->add_option("--out", stats_out, "Also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
  apply_overrides(config, overrides);
  config.validate(prescreen->parsed() || run_all->parsed());
  std::ostream* log = quiet ? nullptr : &std::cerr;
  if (log) *log << "effective config:\n" << to_json(config).dump(2) << "\n";

  if (stats->parsed()) {
    auto gateway = Gateway(make_backend(config), gateway_options(config));
    const auto forge = load_forge(config);
    StatsOptions opts;
    opts.run_scorers = scorers;
    opts.workers = config.workers;
    const auto st = compute_stats(dataset.empty() ? config.output_path() : std::filesystem::path(dataset), gateway,
                                  forge, opts);
    const Json j = to_json(st);
    if (!stats_out.empty()) write_file_atomic(stats_out, j.dump(2) + "\n");
    std::cout << (as_json ? j.dump(2) + "\n" : render_stats_text(st));
    return kOk;
  }

  Pipeline pipeline(config, nullptr, log);
  if (run_all->parsed()) {
    const Json report = pipeline.cmd_run(stop_after);
    std::cout << render_report_text(report);
    return kOk;
  }
  StageReport r;
  if (prescreen->parsed()) r = pipeline.cmd_prescreen();
  if (seed->parsed()) r = pipeline.cmd_seed();
  if (augment->parsed()) r = pipeline.cmd_augment(stop_after);
  if (respond->parsed()) r = pipeline.cmd_respond();
  Json report;
  report["status"] = r.status;
  report["stages"] = Json::array({to_json(r)});
  report["wall_s"] = r.wall_s;
  std::cout << render_report_text(report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const GatewayError& e) {
    std::cerr << "backend error: " << e.what() << " (after " << e.attempts() << " attempts)\n";
    return kBackend;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStage;
  }
}
