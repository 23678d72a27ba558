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

#include <gtest/gtest.h>

#include "doatrack/error.hpp"
#include "doatrack/simulator.hpp"
#include "oracles.hpp"

namespace doatrack {
namespace {

ArrayGeometry square_array() {
  ArrayGeometry g;
  g.mics = {{0.04, 0.04, 0.0}, {-0.04, 0.04, 0.0}, {-0.04, -0.04, 0.0}, {0.04, -0.04, 0.0}};
  return g;
}

SceneSpec one_source(double az, ExcitationType type = ExcitationType::kWhite) {
  SceneSpec spec;
  spec.geometry = square_array();
  spec.duration_s = 2.0;
  spec.seed = 3;
  spec.sources.push_back({{{0.0, az}}, {{0.2, 1.8}}, {type, {}, 120.0}, 1.0});
  return spec;
}

TEST(Render, SameSeedIsBitIdentical) {
  SceneSpec spec = one_source(30.0, ExcitationType::kHarmonic);
  spec.reverb.enabled = true;
  spec.noise.snr_db = 10.0;
  const auto [a1, g1] = render(spec);
  const auto [a2, g2] = render(spec);
  EXPECT_TRUE((a1.samples.array() == a2.samples.array()).all());
  EXPECT_EQ(g1.frame_times, g2.frame_times);
  spec.seed = 4;
  const auto [a3, g3] = render(spec);
  EXPECT_FALSE((a1.samples.array() == a3.samples.array()).all());
}

TEST(Render, InterChannelDelayMatchesTdoa) {
  for (const double az : {0.0, 35.0, -120.0}) {
    const auto [audio, truth] = render(one_source(az));
    const Eigen::VectorXd tau = tdoa(square_array(), az) * 16000.0;
    for (int i = 1; i < 4; ++i) {
      const double lag = oracle::xcorr_delay(audio.samples.col(i), audio.samples.col(0), 8);
      EXPECT_NEAR(lag, tau(i), 0.25) << "azimuth " << az << " channel " << i + 1;
    }
  }
}

TEST(Render, SnrWithinHalfDecibel) {
  for (const double snr : {0.0, 10.0, 20.0}) {
    SceneSpec clean = one_source(50.0, ExcitationType::kSpeechShaped);
    SceneSpec noisy = clean;
    noisy.noise.snr_db = snr;
    const auto [a_clean, g] = render(clean);
    const auto [a_noisy, g2] = render(noisy);
    const Eigen::MatrixXd noise = a_noisy.samples - a_clean.samples;
    double ps = 0.0;
    double pn = 0.0;
    for (std::size_t t = 0; t < g.frame_times.size(); ++t) {
      if (!g.sources[0].active[t]) continue;
      const auto s = static_cast<Eigen::Index>(t) * g.hop;
      ps += a_clean.samples.middleRows(s, g.window_length).squaredNorm();
      pn += noise.middleRows(s, g.window_length).squaredNorm();
    }
    EXPECT_NEAR(10.0 * std::log10(ps / pn), snr, 0.5);
  }
}

TEST(Render, NoiseOnlySceneHasNoActiveFrames) {
  SceneSpec spec;
  spec.geometry = square_array();
  spec.duration_s = 1.0;
  spec.noise.level_dbfs = -30.0;
  const auto [audio, truth] = render(spec);
  EXPECT_EQ(truth.active_frame_count(), 0u);
  EXPECT_GT(audio.samples.squaredNorm(), 0.0);
  spec.noise.snr_db = 10.0;
  EXPECT_THROW(render(spec), InputError);
}

TEST(Render, GroundTruthFollowsTrajectoryAndActivity) {
  SceneSpec spec = one_source(0.0);
  spec.sources[0].trajectory = {{0.0, 170.0}, {2.0, -170.0}};
  const auto [audio, truth] = render(spec);
  ASSERT_EQ(truth.frame_count(), (audio.length() - 256) / 128 + 1);
  for (std::size_t t = 0; t < truth.frame_times.size(); ++t) {
    const double time = truth.frame_times[t];
    // Shorter arc through 180 at 10 deg/s.
    const double expected = 170.0 + 10.0 * time;
    EXPECT_NEAR(std::remainder(truth.sources[0].azimuth_deg[t] - expected, 360.0), 0.0, 1e-9);
    EXPECT_LE(std::abs(truth.sources[0].azimuth_deg[t]), 180.0);
    EXPECT_EQ(truth.sources[0].active[t], time >= 0.2 && time < 1.8);
  }
}

TEST(GroundTruth, ExportRoundTripIsLossless) {
  SceneSpec spec = one_source(-45.0);
  spec.reverb.enabled = true;
  spec.reverb.taps = 3;
  const auto [audio, truth] = render(spec);
  const auto path = std::filesystem::temp_directory_path() / "doatrack_gt_roundtrip.json";
  export_ground_truth(truth, path);
  const GroundTruth back = load_ground_truth(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.frame_times, truth.frame_times);
  EXPECT_EQ(back.hop, truth.hop);
  ASSERT_EQ(back.sources.size(), 1u);
  EXPECT_EQ(back.sources[0].azimuth_deg, truth.sources[0].azimuth_deg);
  EXPECT_EQ(back.sources[0].active, truth.sources[0].active);
  ASSERT_EQ(back.sources[0].planted_ctf.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE((back.sources[0].planted_ctf[i].array() == truth.sources[0].planted_ctf[i].array()).all());
  }
}

TEST(GroundTruth, LoadErrorsNameTheFile) {
  const auto path = std::filesystem::temp_directory_path() / "doatrack_gt_bad.json";
  std::ofstream(path) << R"({"format": "something-else"})";
  try {
    load_ground_truth(path);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_ground_truth(path), Error);
}

TEST(ReverbTaps, DecayAndDirectToReverberantRatio) {
  const ReverbSpec r{true, 0.3, 10.0, 8};
  const Eigen::VectorXd g = reverb_tap_gains(r, 0.008);
  EXPECT_EQ(g(0), 1.0);
  for (int q = 2; q < 8; ++q) EXPECT_NEAR(g(q) / g(q - 1), std::exp(-0.008 / 0.3), 1e-12);
  EXPECT_NEAR(10.0 * std::log10(1.0 / g.tail(7).squaredNorm()), 10.0, 1e-9);
}

TEST(SceneFile, StrictParsing) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "doatrack_scene_test.json";
  std::ofstream(path) << R"({
    "duration_s": 1.0, "seed": 5,
    "geometry": {"mics": [[0, 0, 0], [0.1, 0, 0]]},
    "sources": [{"trajectory": [[0, 10], [1, 20]], "activity": [[0, 1]],
                 "excitation": {"type": "speech_shaped"}}],
    "reverb": {"type": "ctf", "decay_s": 0.2},
    "noise": {"snr_db": 15}
  })";
  const SceneSpec spec = load_scene(path);
  EXPECT_EQ(spec.seed, 5u);
  EXPECT_TRUE(spec.reverb.enabled);
  EXPECT_EQ(spec.sources[0].excitation.type, ExcitationType::kSpeechShaped);
  EXPECT_DOUBLE_EQ(spec.sources[0].azimuth_at(0.5), 15.0);
  std::ofstream(path) << R"({"geometry": {"mics": [[0, 0, 0], [0.1, 0, 0]]}, "sorces": []})";
  EXPECT_THROW(load_scene(path), InputError);
  std::ofstream(path) << R"({"geometry": {"mics": [[0, 0, 0], [0.1, 0, 0]]},
                            "sources": [{"trajectory": [[0, 200]]}]})";
  EXPECT_THROW(load_scene(path), InputError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace doatrack
