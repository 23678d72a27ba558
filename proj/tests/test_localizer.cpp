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
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "doatrack/localizer.hpp"
#include "oracles.hpp"

namespace doatrack {
namespace {

Eigen::VectorXd random_simplex(Eigen::Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::VectorXd w(d);
  for (Eigen::Index i = 0; i < d; ++i) w(i) = u(rng);
  return w / w.sum();
}

Eigen::MatrixXd random_likelihoods(Eigen::Index d, Eigen::Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 3.0);
  Eigen::MatrixXd l(d, k);
  for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = u(rng);
  return l;
}

double nll(const Eigen::VectorXd& w, const Eigen::MatrixXd& l) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < l.cols(); ++k) s -= std::log(w.dot(l.col(k)));
  return s / static_cast<double>(l.cols());
}

TEST(Likelihoods, ComplexGaussianDensity) {
  ArrayGeometry g;
  g.mics = {{0.0, 0.0, 0.0}, {0.1, 0.0, 0.0}};
  const auto grid = CandidateGrid::from_geometry(g, {-90.0, 0.0, 90.0, 180.0}, 16000.0, 16);
  FeatureSet fs;
  fs.features = {{3, 2, Complex(0.2, -0.1)}, {5, 2, Complex(-0.3, 0.4)}};
  const Eigen::MatrixXd l = component_likelihoods(fs, grid, 0.1);
  ASSERT_EQ(l.rows(), 4);
  ASSERT_EQ(l.cols(), 2);
  for (int d = 0; d < 4; ++d) {
    for (int k = 0; k < 2; ++k) {
      const auto& f = fs.features[static_cast<std::size_t>(k)];
      const double expected = std::exp(-std::norm(f.value - grid.at(f.bin, 2, d)) / 0.1) / (std::numbers::pi * 0.1);
      EXPECT_NEAR(l(d, k), expected, 1e-14);
    }
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd w = random_simplex(12, rng);
    const Eigen::MatrixXd l = random_likelihoods(12, 7, rng);
    const Eigen::VectorXd fd = oracle::numeric_gradient([&](const Eigen::VectorXd& x) { return nll(x, l); }, w);
    EXPECT_LT((nll_gradient(w, l) - fd).norm(), 1e-6);
    const Eigen::VectorXd fd_h = oracle::numeric_gradient([](const Eigen::VectorXd& x) { return entropy(x); }, w);
    EXPECT_LT((entropy_gradient(w) - fd_h).norm(), 1e-6);
  }
}

TEST(EgUpdate, ClosedFormStep) {
  std::mt19937_64 rng(3);
  const Eigen::VectorXd w = random_simplex(6, rng);
  const Eigen::MatrixXd l = random_likelihoods(6, 4, rng);
  const double eta = 0.07;
  const double gamma = 0.1;
  Eigen::VectorXd expected(6);
  for (int d = 0; d < 6; ++d) {
    double g = 0.0;
    for (int k = 0; k < 4; ++k) g -= l(d, k) / w.dot(l.col(k)) / 4.0;
    const double dh = -(1.0 + std::log(w(d)));
    expected(d) = w(d) * std::exp(-eta * (g + gamma * dh));
  }
  expected /= expected.sum();
  EXPECT_LT((eg_update(w, l, eta, gamma) - expected).norm(), 1e-14);
}

TEST(EgUpdate, UniformEvidenceKeepsUniformWeights) {
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(8, 1.0 / 8);
  const Eigen::MatrixXd l = Eigen::MatrixXd::Constant(8, 5, 0.7);
  EXPECT_LT((eg_update(w, l, 0.07, 0.1) - w).norm(), 1e-15);
}

TEST(EgUpdate, ConcentratesOnBestComponent) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(10, 0.1);
  Eigen::MatrixXd l = Eigen::MatrixXd::Constant(10, 20, 0.1);
  l.row(4).setConstant(3.0);
  for (int t = 0; t < 200; ++t) w = eg_update(w, l, 0.07, 0.1);
  Eigen::Index best = 0;
  w.maxCoeff(&best);
  EXPECT_EQ(best, 4);
  EXPECT_GT(w(4), 0.9);
}

TEST(EgUpdate, ExtremeInputsStayOnSimplex) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 0.2);
  w(0) = 1e-290;
  w /= w.sum();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(5, 3);
  l(0, 0) = 1e300;
  l(1, 1) = 1e-300;
  std::size_t clamped = 0;
  const Eigen::VectorXd next = eg_update(w, l, 5.0, 0.1, &clamped);
  EXPECT_TRUE(next.allFinite());
  EXPECT_NEAR(next.sum(), 1.0, 1e-12);
  EXPECT_GT(next.minCoeff(), 0.0);
  EXPECT_GT(clamped, 0u);
}

TEST(SilentDecay, RelaxesTowardUniform) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
  w(2) = 1.0;
  const Eigen::VectorXd next = silent_decay(w, 0.065);
  EXPECT_NEAR(next.sum(), 1.0, 1e-15);
  EXPECT_NEAR(next(2), 1.0 - 0.065 + 0.065 / 4, 1e-15);
  EXPECT_NEAR(next(0), 0.065 / 4, 1e-15);
}

TEST(SpatialSmooth, CircularAndMassPreserving) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
  w(0) = 1.0;
  const Eigen::VectorXd s = spatial_smooth(w, 0.02);
  EXPECT_NEAR(s.sum(), 1.0, 1e-15);
  EXPECT_NEAR(s(5), 0.02 / 1.04, 1e-15);
  EXPECT_NEAR(s(1), 0.02 / 1.04, 1e-15);
  EXPECT_NEAR(s(0), 1.0 / 1.04, 1e-15);
  EXPECT_EQ(s(3), 0.0);
}

TEST(PeakSelect, ThresholdSeparationAndWrap) {
  const std::vector<double> az{-150.0, -100.0, -50.0, 0.0, 5.0, 10.0, 60.0, 120.0, 175.0, 180.0};
  Eigen::VectorXd w(10);
  w << 0.20, 0.01, 0.02, 0.10, 0.01, 0.09, 0.03, 0.04, 0.19, 0.01;
  w /= w.sum();
  const auto peaks = peak_select(w, az, 0.05, 15.0);
  // -150 (wraps next to 180) and 175 are 35 deg apart; 0 and 10 are 10 deg apart.
  ASSERT_EQ(peaks.size(), 3u);
  EXPECT_EQ(peaks[0].azimuth_deg, -150.0);
  EXPECT_EQ(peaks[1].azimuth_deg, 175.0);
  EXPECT_EQ(peaks[2].azimuth_deg, 0.0);
  EXPECT_TRUE(peak_select(w, az, 0.5, 15.0).empty());
}

TEST(CircularDistance, Wraps) {
  EXPECT_DOUBLE_EQ(circular_distance_deg(179.0, -179.0), 2.0);
  EXPECT_DOUBLE_EQ(circular_distance_deg(-90.0, 90.0), 180.0);
  EXPECT_DOUBLE_EQ(circular_distance_deg(10.0, 370.0), 0.0);
}

TEST(Localizer, SilentFramesDecayAndFeaturesSharpen) {
  ArrayGeometry g;
  g.mics = {{0.04, 0.04, 0.0}, {-0.04, 0.04, 0.0}, {-0.04, -0.04, 0.0}, {0.04, -0.04, 0.0}};
  const auto grid = CandidateGrid::from_geometry(g, default_azimuths(72), 16000.0, 256);
  Localizer loc(&grid, LocalizerParams{});
  const int target = 40;
  FeatureSet fs;
  for (int bin = 10; bin < 100; ++bin) {
    for (int ch = 2; ch <= 4; ++ch) fs.features.push_back({bin, ch, grid.at(bin, ch, target)});
  }
  for (int t = 0; t < 100; ++t) loc.update(fs);
  Eigen::Index best = 0;
  const double peak = loc.weights().maxCoeff(&best);
  EXPECT_EQ(best, target);
  ASSERT_FALSE(loc.peaks().empty());
  EXPECT_EQ(loc.peaks().front().index, target);
  loc.update(FeatureSet{});
  EXPECT_LT(loc.weights().maxCoeff(), peak);
  EXPECT_NEAR(loc.weights().sum(), 1.0, 1e-12);
}

}  // namespace
}  // namespace doatrack
