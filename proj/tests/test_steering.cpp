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
#include <numbers>

#include <gtest/gtest.h>
#include <json.hpp>

#include "doatrack/error.hpp"
#include "doatrack/steering.hpp"

namespace doatrack {
namespace {

ArrayGeometry x_pair() {
  ArrayGeometry g;
  g.mics = {{0.0, 0.0, 0.0}, {0.1, 0.0, 0.0}};
  return g;
}

TEST(Tdoa, HandExamples) {
  EXPECT_NEAR(std::abs(tdoa(x_pair(), 0.0)(1)), 0.1 / 343.0, 1e-15);
  EXPECT_NEAR(tdoa(x_pair(), 90.0)(1), 0.0, 1e-18);
  EXPECT_EQ(tdoa(x_pair(), 37.0)(0), 0.0);
  // The second microphone sits toward +x, so a source at 0 deg reaches it first.
  EXPECT_LT(tdoa(x_pair(), 0.0)(1), 0.0);
}

TEST(Tdoa, CoincidentMicsHaveZeroDelay) {
  ArrayGeometry g;
  g.mics = {{0.1, 0.2, 0.0}, {0.1, 0.2, 0.0}, {0.1, 0.2, 0.0}};
  for (const double az : {-120.0, 0.0, 45.0}) EXPECT_EQ(tdoa(g, az).norm(), 0.0);
}

TEST(Tdoa, PeriodicInAzimuth) {
  ArrayGeometry g;
  g.mics = {{0.0, 0.0, 0.0}, {0.05, 0.03, 0.0}, {-0.02, 0.07, 0.01}};
  for (double az = -180.0; az <= 180.0; az += 7.5) EXPECT_LT((tdoa(g, az) - tdoa(g, az + 360.0)).norm(), 1e-16);
}

TEST(PredictedFeature, ZeroDelayGivesNormalizedHalf) {
  const Complex c = predicted_feature(x_pair(), 90.0, 1000.0, 2);
  EXPECT_NEAR(c.real(), 0.5 / std::sqrt(1.25), 1e-15);
  EXPECT_NEAR(c.imag(), 0.0, 1e-15);
}

TEST(PredictedFeature, PhaseMatchesDelayAndIsContinuous) {
  const double f = 1500.0;
  const double tau = tdoa(x_pair(), 20.0)(1);
  const Complex c = predicted_feature(x_pair(), 20.0, f, 2);
  EXPECT_NEAR(std::arg(c), std::remainder(-2.0 * std::numbers::pi * f * tau, 2.0 * std::numbers::pi), 1e-12);
  EXPECT_LE(std::abs(c), 1.0);
  Complex prev = predicted_feature(x_pair(), -180.0, f, 2);
  for (double az = -179.9; az <= 180.0; az += 0.1) {
    const Complex cur = predicted_feature(x_pair(), az, f, 2);
    EXPECT_LT(std::abs(cur - prev), 0.01);
    prev = cur;
  }
}

TEST(DefaultAzimuths, SeventyTwoFiveDegreeCells) {
  const auto az = default_azimuths(72);
  ASSERT_EQ(az.size(), 72u);
  EXPECT_DOUBLE_EQ(az.front(), -175.0);
  EXPECT_DOUBLE_EQ(az.back(), 180.0);
  for (std::size_t d = 1; d < az.size(); ++d) EXPECT_NEAR(az[d] - az[d - 1], 5.0, 1e-12);
}

TEST(CandidateGrid, FromGeometryMatchesPointwise) {
  ArrayGeometry g;
  g.mics = {{0.04, 0.04, 0.0}, {-0.04, 0.04, 0.0}, {-0.04, -0.04, 0.0}};
  const auto grid = CandidateGrid::from_geometry(g, default_azimuths(72), 16000.0, 256);
  EXPECT_EQ(grid.size(), 72);
  EXPECT_EQ(grid.channel_count(), 3);
  EXPECT_EQ(grid.bin_count(), 129);
  for (const int bin : {3, 50, 128}) {
    for (const int d : {0, 17, 71}) {
      const Complex expected = predicted_feature(g, grid.azimuth(d), bin * 16000.0 / 256.0, 3);
      EXPECT_NEAR(std::abs(grid.at(bin, 3, d) - expected), 0.0, 1e-14);
    }
  }
}

TEST(CandidateGrid, RejectsBadAzimuths) {
  const std::vector<Eigen::MatrixXcd> predicted{Eigen::MatrixXcd::Zero(3, 2)};
  EXPECT_THROW(CandidateGrid({10.0, 5.0}, predicted), Error);
  EXPECT_THROW(CandidateGrid({-180.0, 5.0}, predicted), Error);
  EXPECT_THROW(CandidateGrid({5.0}, {Eigen::MatrixXcd::Zero(3, 1)}), Error);
}

TEST(Geometry, RejectsSinglePosition) {
  ArrayGeometry g;
  g.mics = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  EXPECT_THROW(validate(g), InputError);
}

class HrtfFile : public ::testing::Test {
 protected:
  std::filesystem::path path = std::filesystem::temp_directory_path() / "doatrack_hrtf_test.json";
  void TearDown() override { std::filesystem::remove(path); }

  void write(int channels, int bins, const std::vector<double>& az) {
    nlohmann::json ratios = nlohmann::json::array();
    for (int i = 0; i < channels - 1; ++i) {
      nlohmann::json per_bin = nlohmann::json::array();
      for (int k = 0; k < bins; ++k) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t d = 0; d < az.size(); ++d) row.push_back({0.1 * k, -0.2 * static_cast<double>(d) + i});
        per_bin.push_back(row);
      }
      ratios.push_back(per_bin);
    }
    const nlohmann::json j = {{"format", "doatrack-hrtf-1"}, {"sample_rate", 16000}, {"fft_size", 2 * (bins - 1)},
                              {"channels", channels}, {"azimuths_deg", az}, {"ratios", ratios}};
    std::ofstream(path) << j.dump();
  }
};

TEST_F(HrtfFile, LoadsAndNormalizes) {
  write(3, 5, {-90.0, 0.0, 90.0, 180.0});
  const auto grid = load_hrtf_table(path, 3, 5, {-90.0, 0.0, 90.0, 180.0});
  const Complex raw(0.1 * 4, -0.2 * 2 + 1);
  EXPECT_NEAR(std::abs(grid.at(4, 3, 2) - raw / std::sqrt(1.0 + std::norm(raw))), 0.0, 1e-15);
}

TEST_F(HrtfFile, MismatchNamesDimensions) {
  write(3, 5, {-90.0, 0.0, 90.0, 180.0});
  try {
    load_hrtf_table(path, 3, 7, {-90.0, 0.0, 90.0, 180.0});
    FAIL() << "expected a format error";
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("expected 7"), std::string::npos) << what;
    EXPECT_NE(what.find("found 5"), std::string::npos) << what;
  }
  EXPECT_THROW(load_hrtf_table(path, 4, 5, {-90.0, 0.0, 90.0, 180.0}), InputError);
  EXPECT_THROW(load_hrtf_table(path, 3, 5, {-90.0, 0.0, 180.0}), InputError);
}

}  // namespace
}  // namespace doatrack
