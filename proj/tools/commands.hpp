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

#ifndef DOATRACK_TOOLS_COMMANDS_HPP
#define DOATRACK_TOOLS_COMMANDS_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "doatrack/config.hpp"
#include "doatrack/eval.hpp"

namespace doatrack::cli {

namespace fs = std::filesystem;

/// Writes audio.wav, ground_truth.json and geometry.json into out_dir.
void run_simulate(const fs::path& scene, const fs::path& out_dir);

struct AnalysisOptions {
  fs::path wav;
  fs::path geometry;
  fs::path out_dir;
  Config config;
  fs::path features_out;  // optional feature dump, .csv or .jsonl
};

/// heatmap.csv, heatmap.pgm, peaks.jsonl and timing.json.
void run_localize(const AnalysisOptions& options);

/// tracks.jsonl and timing.json.
void run_track(const AnalysisOptions& options);

struct EvaluateOptions {
  fs::path input;  // tracks.jsonl or peaks.jsonl
  fs::path ground_truth;
  fs::path out;    // metrics JSON
  Config config;
  fs::path timing;       // optional timing.json whose RF is embedded
  fs::path heatmap;      // optional heatmap.csv for a ROC sweep
  fs::path roc_out;      // ROC CSV, needs heatmap
  double start_s = 0.0;  // frames before this time are not scored
};

MetricsReport run_evaluate(const EvaluateOptions& options);

/// Renders a heatmap CSV as an 8-bit PGM image (frames down, directions across).
void run_heatmap(const fs::path& csv, const fs::path& out, bool log_scale);

}  // namespace doatrack::cli

#endif  // DOATRACK_TOOLS_COMMANDS_HPP
