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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "doatrack/eval.hpp"

namespace doatrack {
namespace {

TEST(GreedyMatch, SingleClosePair) {
  const std::vector<Target> det{{10.0, 1}};
  const std::vector<Target> truth{{12.0, 0}};
  const FrameScore s = greedy_match(det, truth);
  ASSERT_EQ(s.matches.size(), 1u);
  EXPECT_DOUBLE_EQ(s.matches[0].error_deg, 2.0);
  EXPECT_EQ(s.misses, 0);
  EXPECT_EQ(s.false_alarms, 0);
}

TEST(GreedyMatch, FarPairCountsAsMissAndFalseAlarm) {
  const std::vector<Target> det{{10.0, 1}, {50.0, 2}};
  const std::vector<Target> truth{{12.0, 0}, {170.0, 1}};
  const FrameScore s = greedy_match(det, truth);
  ASSERT_EQ(s.matches.size(), 1u);
  EXPECT_EQ(s.matches[0].detection, 0);
  EXPECT_EQ(s.matches[0].truth, 0);
  EXPECT_EQ(s.misses, 1);
  EXPECT_EQ(s.false_alarms, 1);
}

TEST(GreedyMatch, WrapAware) {
  const std::vector<Target> det{{179.0, 1}};
  const std::vector<Target> truth{{-179.0, 0}};
  const FrameScore s = greedy_match(det, truth);
  ASSERT_EQ(s.matches.size(), 1u);
  EXPECT_DOUBLE_EQ(s.matches[0].error_deg, 2.0);
}

TEST(GreedyMatch, GlobalSmallestFirst) {
  // A nearest-per-truth rule would pair 0 with 8; greedy takes (10, 11) first.
  const std::vector<Target> det{{8.0, 1}, {10.0, 2}};
  const std::vector<Target> truth{{0.0, 0}, {11.0, 1}};
  const FrameScore s = greedy_match(det, truth);
  ASSERT_EQ(s.matches.size(), 2u);
  EXPECT_EQ(s.matches[0].detection, 1);
  EXPECT_EQ(s.matches[0].truth, 1);
  EXPECT_EQ(s.matches[1].detection, 0);
  EXPECT_EQ(s.matches[1].truth, 0);
}

TEST(GreedyMatch, TieGoesToLowerDetectionIndex) {
  const std::vector<Target> det{{5.0, 1}, {-5.0, 2}};
  const std::vector<Target> truth{{0.0, 0}};
  const FrameScore s = greedy_match(det, truth);
  ASSERT_EQ(s.matches.size(), 1u);
  EXPECT_EQ(s.matches[0].detection, 0);
}

TEST(GreedyMatch, ConservationAndPermutationInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-179.9, 180.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Target> det(static_cast<std::size_t>(trial % 5));
    std::vector<Target> truth(static_cast<std::size_t>((trial / 5) % 4));
    for (auto& d : det) d.azimuth_deg = u(rng);
    for (auto& t : truth) t.azimuth_deg = u(rng);
    const FrameScore s = greedy_match(det, truth);
    const auto m = static_cast<int>(s.matches.size());
    EXPECT_EQ(s.misses + m, static_cast<int>(truth.size()));
    EXPECT_EQ(s.false_alarms + m, static_cast<int>(det.size()));
    std::vector<double> errs;
    for (const auto& p : s.matches) errs.push_back(p.error_deg);
    std::shuffle(det.begin(), det.end(), rng);
    std::shuffle(truth.begin(), truth.end(), rng);
    const FrameScore s2 = greedy_match(det, truth);
    std::vector<double> errs2;
    for (const auto& p : s2.matches) errs2.push_back(p.error_deg);
    std::sort(errs.begin(), errs.end());
    std::sort(errs2.begin(), errs2.end());
    EXPECT_EQ(errs, errs2);
    EXPECT_EQ(s.misses, s2.misses);
  }
}

TEST(Aggregate, PerfectOutput) {
  std::vector<FrameScore> frames;
  for (int t = 0; t < 10; ++t) {
    const std::vector<Target> x{{20.0, 0}, {-60.0, 1}};
    const std::vector<Target> d{{20.0, 5}, {-60.0, 6}};
    frames.push_back(greedy_match(d, x));
  }
  const MetricsReport r = aggregate(frames);
  EXPECT_EQ(r.md_rate, 0.0);
  EXPECT_EQ(r.fa_rate, 0.0);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.id_switches, 0);
}

TEST(Aggregate, NoDetections) {
  std::vector<FrameScore> frames;
  const std::vector<Target> truth{{20.0, 0}};
  for (int t = 0; t < 4; ++t) frames.push_back(greedy_match({}, truth));
  const MetricsReport r = aggregate(frames);
  EXPECT_EQ(r.md_rate, 100.0);
  EXPECT_EQ(r.fa_rate, 0.0);
}

TEST(Aggregate, OneIdentitySwapInFiveFrames) {
  // Frames: track 7 on speaker 0, a gap, then track 9 takes over.
  std::vector<FrameScore> frames;
  const std::vector<Target> truth{{30.0, 0}};
  frames.push_back(greedy_match(std::vector<Target>{{31.0, 7}}, truth));
  frames.push_back(greedy_match(std::vector<Target>{{29.0, 7}}, truth));
  frames.push_back(greedy_match({}, truth));
  frames.push_back(greedy_match(std::vector<Target>{{30.5, 9}}, truth));
  frames.push_back(greedy_match(std::vector<Target>{{30.0, 9}}, truth));
  const MetricsReport r = aggregate(frames);
  EXPECT_EQ(r.id_switches, 1);
  EXPECT_NEAR(r.md_rate, 20.0, 1e-12);
  EXPECT_NEAR(r.mae, (1.0 + 1.0 + 0.5 + 0.0) / 4.0, 1e-12);
}

TEST(Roc, EmptyHeatmapsAndMonotoneFalseAlarms) {
  const std::vector<double> az{-90.0, 0.0, 90.0, 180.0};
  const std::vector<std::vector<Target>> truths(5, std::vector<Target>{{0.0, 0}});
  const std::vector<Eigen::VectorXd> flat(5, Eigen::VectorXd::Constant(4, 0.25));
  const std::vector<double> thr{0.3, 0.5};
  for (const auto& p : roc_sweep(flat, az, truths, thr)) {
    EXPECT_EQ(p.fa_rate, 0.0);
    EXPECT_EQ(p.md_rate, 100.0);
  }

  std::vector<Eigen::VectorXd> maps;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd w(4);
    w << 0.1 + 0.05 * t, 0.5, 0.05, 0.35 - 0.05 * t;
    maps.push_back(w);
  }
  const std::vector<double> sweep{0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 1e9};
  const auto pts = roc_sweep(maps, az, truths, sweep);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LE(pts[i].fa_rate, pts[i - 1].fa_rate);
  EXPECT_EQ(pts.back().md_rate, 100.0);
  EXPECT_EQ(pts.front().md_rate, 0.0);
}

TEST(RealtimeFactor, Ratio) {
  EXPECT_DOUBLE_EQ(realtime_factor(5.0, 10.0), 0.5);
  EXPECT_DOUBLE_EQ(realtime_factor(10.0, 10.0), 1.0);
}

}  // namespace
}  // namespace doatrack
