// Copyright 2026 The doatrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "doatrack/error.hpp"

namespace {

using doatrack::Config;
using doatrack::UsageError;

/// Turns leftover "--a.b value", "--a.b=value" or "--seed 3" tokens into config overrides.
std::vector<std::pair<std::string, std::string>> parse_overrides(std::vector<std::string> extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() == 2) {
      throw UsageError("unexpected argument '" + tok + "' (config overrides look like --section.key value)");
    }
    const auto eq = tok.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(tok.substr(2, eq - 2), tok.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw UsageError("override '" + tok + "' needs a value");
      out.emplace_back(tok.substr(2), extras[++i]);
    }
  }
  return out;
}

Config resolve_config(const std::string& path, const CLI::App* sub) {
  Config c = path.empty() ? Config{} : doatrack::load_config(path);
  return doatrack::apply_overrides(c, parse_overrides(sub->remaining()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online multi-speaker DOA localization and tracking"};
  app.set_version_flag("--version", std::string("doatrack ") + DOATRACK_VERSION);
  app.require_subcommand(1);

  std::string scene, out_dir, wav, geometry, config_path, features_out;
  std::string input, ground_truth, timing, heatmap, roc_out, metrics_out, pgm_out;
  double start_s = 0.0;
  bool log_scale = false;

  auto* sim = app.add_subcommand("simulate", "Render a scene to audio.wav, ground_truth.json and geometry.json");
  sim->add_option("scene", scene, "Scene JSON")->required();
  sim->add_option("-o,--out", out_dir, "Output directory")->required();

  const auto analysis = [&](CLI::App* sub) {
    sub->add_option("wav", wav, "Multichannel WAV")->required();
    sub->add_option("-g,--geometry", geometry, "Array geometry JSON")->required();
    sub->add_option("-c,--config", config_path, "Config JSON");
    sub->add_option("-o,--out", out_dir, "Output directory")->required();
    sub->add_option("--features-out", features_out, "Dump validated features (.csv or .jsonl)");
    sub->allow_extras();
  };
  auto* loc = app.add_subcommand("localize", "Frame-wise localization: heatmap.csv/.pgm and peaks.jsonl");
  analysis(loc);
  auto* trk = app.add_subcommand("track", "Localization and tracking: tracks.jsonl");
  analysis(trk);

  auto* ev = app.add_subcommand("evaluate", "Score tracks.jsonl or peaks.jsonl against ground truth");
  ev->add_option("input", input, "tracks.jsonl or peaks.jsonl")->required();
  ev->add_option("-t,--ground-truth", ground_truth, "ground_truth.json")->required();
  ev->add_option("-c,--config", config_path, "Config JSON");
  ev->add_option("-o,--out", metrics_out, "Metrics JSON output");
  ev->add_option("--timing", timing, "timing.json whose real-time factor is embedded");
  ev->add_option("--heatmap", heatmap, "heatmap.csv for a ROC sweep");
  ev->add_option("--roc-out", roc_out, "ROC CSV output");
  ev->add_option("--start-s", start_s, "Ignore frames before this time");
  ev->allow_extras();

  auto* hm = app.add_subcommand("heatmap", "Render heatmap.csv as a PGM image");
  hm->add_option("csv", heatmap, "heatmap.csv")->required();
  hm->add_option("-o,--out", pgm_out, "PGM output")->required();
  hm->add_flag("--log", log_scale, "Logarithmic intensity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) {
      doatrack::cli::run_simulate(scene, out_dir);
    } else if (loc->parsed() || trk->parsed()) {
      CLI::App* sub = loc->parsed() ? loc : trk;
      doatrack::cli::AnalysisOptions o{wav, geometry, out_dir, resolve_config(config_path, sub), features_out};
      if (loc->parsed()) {
        doatrack::cli::run_localize(o);
      } else {
        doatrack::cli::run_track(o);
      }
    } else if (ev->parsed()) {
      doatrack::cli::EvaluateOptions o;
      o.input = input;
      o.ground_truth = ground_truth;
      o.out = metrics_out;
      o.config = resolve_config(config_path, ev);
      o.timing = timing;
      o.heatmap = heatmap;
      o.roc_out = roc_out;
      o.start_s = start_s;
      const auto report = doatrack::cli::run_evaluate(o);
      std::fputs(doatrack::metrics_table(report).c_str(), stdout);
    } else if (hm->parsed()) {
      doatrack::cli::run_heatmap(heatmap, pgm_out, log_scale);
    }
  } catch (const doatrack::Error& e) {
    std::fprintf(stderr, "doatrack: %s\n", e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "doatrack: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "doatrack: numerical failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
