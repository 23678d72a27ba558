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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "doatrack/audio_io.hpp"
#include "doatrack/config.hpp"
#include "doatrack/error.hpp"

namespace doatrack {
namespace {

namespace fs = std::filesystem;

AudioBuffer random_audio(int channels, Eigen::Index n) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  AudioBuffer a;
  a.samples.resize(n, channels);
  for (Eigen::Index i = 0; i < a.samples.size(); ++i) a.samples.data()[i] = u(rng);
  return a;
}

TEST(Wav, Float32RoundTripIsExactToSinglePrecision) {
  const AudioBuffer a = random_audio(4, 1000);
  const fs::path p = fs::temp_directory_path() / "doatrack_f32.wav";
  write_wav(p, a, WavEncoding::kFloat32);
  const AudioBuffer b = read_wav(p);
  fs::remove(p);
  ASSERT_EQ(b.channel_count(), 4);
  ASSERT_EQ(b.length(), 1000);
  EXPECT_EQ(b.sample_rate, 16000.0);
  EXPECT_TRUE(b.samples.isApprox(a.samples.cast<float>().cast<double>(), 0.0));
}

TEST(Wav, Pcm16RoundTripWithinQuantization) {
  const AudioBuffer a = random_audio(2, 500);
  const fs::path p = fs::temp_directory_path() / "doatrack_pcm.wav";
  write_wav(p, a, WavEncoding::kPcm16);
  const AudioBuffer b = read_wav(p);
  fs::remove(p);
  EXPECT_LE((a.samples - b.samples).cwiseAbs().maxCoeff(), 1.0 / 32768.0);
}

TEST(Wav, RejectsGarbageAndMono) {
  const fs::path p = fs::temp_directory_path() / "doatrack_bad.wav";
  std::ofstream(p) << "definitely not RIFF";
  EXPECT_THROW(read_wav(p), InputError);
  fs::remove(p);
  EXPECT_THROW(read_wav(p), InputError);
  AudioBuffer mono = random_audio(2, 10);
  mono.samples = mono.samples.leftCols(1).eval();
  EXPECT_THROW(validate(mono), InputError);
  AudioBuffer nan = random_audio(2, 10);
  nan.samples(3, 1) = std::nan("");
  EXPECT_THROW(validate(nan), InputError);
}

TEST(Config, DefaultsSurviveJsonRoundTrip) {
  const Config c;
  const Config back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_DOUBLE_EQ(c.stft.window_ms, 16.0);
  EXPECT_EQ(c.steering.directions, 72);
  EXPECT_DOUBLE_EQ(c.tracker.obs_cov(0, 0), 0.03);
}

TEST(Config, UnknownKeyIsRejectedByName) {
  nlohmann::json j = to_json(Config{});
  j["localizer"]["gamma_typo"] = 1.0;
  try {
    config_from_json(j);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma_typo"), std::string::npos);
  }
}

TEST(Config, WrongTypeNamesTheField) {
  nlohmann::json j = to_json(Config{});
  j["tracker"]["max_speakers"] = "three";
  try {
    config_from_json(j);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("tracker.max_speakers"), std::string::npos);
  }
}

TEST(Config, DottedOverrides) {
  const Config c = apply_overrides(Config{}, {{"tracker.max_speakers", "2"}, {"localizer.gamma", "0.2"}, {"seed", "11"}});
  EXPECT_EQ(c.tracker.max_speakers, 2);
  EXPECT_DOUBLE_EQ(c.localizer.gamma, 0.2);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_THROW(apply_overrides(Config{}, {{"tracker.nope", "1"}}), UsageError);
  EXPECT_THROW(apply_overrides(Config{}, {{"tracker", "1"}}), UsageError);
  EXPECT_THROW(apply_overrides(Config{}, {{"tracker.max_speakers", "-1"}}), InputError);
}

TEST(Config, LoadFromFile) {
  const fs::path p = fs::temp_directory_path() / "doatrack_cfg.json";
  std::ofstream(p) << R"({"tracker": {"iterations": 3}, "threads": 2})";
  const Config c = load_config(p);
  EXPECT_EQ(c.tracker.iterations, 3);
  EXPECT_EQ(c.threads, 2);
  EXPECT_EQ(c.tracker.max_speakers, Config{}.tracker.max_speakers);
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_config(p), InputError);
  fs::remove(p);
}

}  // namespace
}  // namespace doatrack
