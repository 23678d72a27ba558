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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "../tools/commands.hpp"
#include "doatrack/audio_io.hpp"
#include "doatrack/error.hpp"
#include "doatrack/pipeline.hpp"
#include "doatrack/simulator.hpp"

namespace doatrack {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

long count_lines(const fs::path& p) {
  std::ifstream in(p);
  long n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

class PipelineEndToEnd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "doatrack_pipeline_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "scene.json") << R"({
      "duration_s": 3.0, "seed": 21,
      "geometry": {"mics": [[0.04, 0.04, 0], [-0.04, 0.04, 0], [-0.04, -0.04, 0], [0.04, -0.04, 0]]},
      "sources": [{"trajectory": [[0, -60]], "activity": [[0.2, 3.0]],
                   "excitation": {"type": "harmonic", "f0_hz": 140}}],
      "reverb": {"type": "ctf", "decay_s": 0.2, "drr_db": 12, "taps": 6},
      "noise": {"snr_db": 25}
    })";
    cli::run_simulate(dir_ / "scene.json", dir_ / "sim");
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static cli::AnalysisOptions options(const fs::path& out) {
    return {dir_ / "sim" / "audio.wav", dir_ / "sim" / "geometry.json", out, Config{}, {}};
  }

  static inline fs::path dir_;
};

TEST_F(PipelineEndToEnd, LocalizeThenEvaluate) {
  cli::run_localize(options(dir_ / "loc"));
  for (const char* f : {"heatmap.csv", "heatmap.pgm", "peaks.jsonl", "timing.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "loc" / f)) << f;
  }
  cli::EvaluateOptions e;
  e.input = dir_ / "loc" / "peaks.jsonl";
  e.ground_truth = dir_ / "sim" / "ground_truth.json";
  e.out = dir_ / "loc" / "metrics.json";
  e.timing = dir_ / "loc" / "timing.json";
  e.start_s = 0.7;
  const MetricsReport r = cli::run_evaluate(e);
  EXPECT_GT(r.matches, 0);
  EXPECT_LE(r.mae, 5.0);
  EXPECT_GT(r.realtime_factor, 0.0);
  EXPECT_TRUE(fs::exists(e.out));
}

TEST_F(PipelineEndToEnd, TrackIsDeterministic) {
  cli::run_track(options(dir_ / "t1"));
  cli::run_track(options(dir_ / "t2"));
  const std::string a = slurp(dir_ / "t1" / "tracks.jsonl");
  EXPECT_EQ(a, slurp(dir_ / "t2" / "tracks.jsonl"));
  EXPECT_GT(count_lines(dir_ / "t1" / "tracks.jsonl"), 1);
  cli::EvaluateOptions e;
  e.input = dir_ / "t1" / "tracks.jsonl";
  e.ground_truth = dir_ / "sim" / "ground_truth.json";
  e.start_s = 1.0;
  const MetricsReport r = cli::run_evaluate(e);
  EXPECT_LE(r.mae, 5.0);
  EXPECT_LE(r.md_rate, 20.0);
}

TEST_F(PipelineEndToEnd, StreamingChunkSizeDoesNotMatter) {
  const AudioBuffer audio = read_wav(dir_ / "sim" / "audio.wav");
  const ArrayGeometry geom = load_geometry(dir_ / "sim" / "geometry.json");
  Config config;
  config.resolve(audio.sample_rate);
  std::vector<Eigen::VectorXd> whole;
  std::vector<Eigen::VectorXd> chunked;
  Pipeline p1(config, geom, audio.sample_rate);
  p1.process(audio, [&](const FrameOutput& o) { whole.push_back(*o.weights); });
  Pipeline p2(config, geom, audio.sample_rate);
  for (Eigen::Index s = 0; s < audio.length(); s += 37) {
    const Eigen::Index n = std::min<Eigen::Index>(37, audio.length() - s);
    p2.push(audio.samples.middleRows(s, n), [&](const FrameOutput& o) { chunked.push_back(*o.weights); });
  }
  ASSERT_EQ(whole.size(), chunked.size());
  for (std::size_t t = 0; t < whole.size(); ++t) ASSERT_TRUE((whole[t].array() == chunked[t].array()).all()) << t;
}

TEST_F(PipelineEndToEnd, SilentInputYieldsNoTracks) {
  AudioBuffer silent;
  silent.samples = Eigen::MatrixXd::Zero(32000, 4);
  write_wav(dir_ / "silent.wav", silent);
  cli::AnalysisOptions o = options(dir_ / "silent");
  o.wav = dir_ / "silent.wav";
  cli::run_track(o);
  EXPECT_EQ(count_lines(dir_ / "silent" / "tracks.jsonl"), 1);  // header only
}

#ifdef DOATRACK_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(DOATRACK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(PipelineEndToEnd, CliExitCodes) {
  const std::string wav = (dir_ / "sim" / "audio.wav").string();
  const std::string geom = (dir_ / "sim" / "geometry.json").string();
  const std::string out = (dir_ / "cli").string();
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("localize"), 1);
  EXPECT_EQ(run_cli("localize " + wav + " -g " + geom + " -o " + out + " --tracker.bogus 1"), 1);
  EXPECT_EQ(run_cli("localize /nonexistent.wav -g " + geom + " -o " + out), 2);
  EXPECT_EQ(run_cli("localize " + wav + " -g " + geom + " -o " + out + " --tracker.max_speakers -2"), 2);
  EXPECT_EQ(run_cli("heatmap " + (dir_ / "sim" / "geometry.json").string() + " -o " + out + "/x.pgm"), 2);
  EXPECT_EQ(run_cli("localize " + wav + " -g " + geom + " -o " + out + " --localizer.gamma=0.1 --seed 3"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "cli" / "heatmap.pgm"));
}
#endif

}  // namespace
}  // namespace doatrack
