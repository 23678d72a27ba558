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

#ifndef DOATRACK_LOCALIZER_HPP
#define DOATRACK_LOCALIZER_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "doatrack/dprtf.hpp"
#include "doatrack/steering.hpp"

namespace doatrack {

struct LocalizerParams {
  double sigma2 = 0.1;              // CGMM component variance
  double eta = 0.07;                // EG step
  double gamma = 0.1;               // entropy weight
  double eta_silent = 0.065;        // decay toward uniform on empty frames
  double smoothing = 0.02;          // neighbor weight of the spatial kernel
  double peak_threshold = 0.05;
  double min_separation_deg = 15.0;
};

/// Exponent magnitude beyond which EG multipliers are clamped.
inline constexpr double kExponentClamp = 50.0;
inline constexpr double kWeightFloor = 1e-300;

/// (D x K) complex-Gaussian densities (1 / (pi s2)) exp(-|c - c_d|^2 / s2) of
/// every feature under every candidate direction.
Eigen::MatrixXd component_likelihoods(const FeatureSet& features, const CandidateGrid& grid, double sigma2);

/// Gradient of the normalized negative log-likelihood with respect to the
/// weights, evaluated at `weights`: -(1/K) sum_k L[d,k] / (w . L[:,k]).
Eigen::VectorXd nll_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& likelihoods);

/// Entropy H = -sum w log w.
double entropy(const Eigen::VectorXd& weights);

/// Gradient of the entropy, -(1 + log w).
Eigen::VectorXd entropy_gradient(const Eigen::VectorXd& weights);

/// Exponentiated-gradient step on NLL + gamma * H: multipliers
/// r = exp(-eta (dNLL/dw + gamma dH/dw)), then w <- r w / sum(r w).
/// `clamped`, when given, is incremented for every clamped exponent.
Eigen::VectorXd eg_update(const Eigen::VectorXd& weights, const Eigen::MatrixXd& likelihoods, double eta,
                          double gamma, std::size_t* clamped = nullptr);

/// w <- (1 - eta') w + eta' / D.
Eigen::VectorXd silent_decay(const Eigen::VectorXd& weights, double eta_silent);

/// Circular three-tap smoothing (w_d + a w_{d-1} + a w_{d+1}) / (1 + 2a),
/// renormalized to unit sum.
Eigen::VectorXd spatial_smooth(const Eigen::VectorXd& weights, double neighbor = 0.02);

struct Peak {
  double azimuth_deg = 0.0;
  double weight = 0.0;
  int index = 0;
};

/// Circular local maxima above `threshold`, kept greedily by descending weight
/// when at least `min_separation_deg` from every kept peak.
std::vector<Peak> peak_select(const Eigen::VectorXd& weights, const std::vector<double>& azimuths_deg,
                              double threshold, double min_separation_deg = 15.0);

/// Shortest angular distance in degrees, in [0, 180].
double circular_distance_deg(double a, double b);

/// Frame-wise online localizer: one weight vector per STFT frame.
class Localizer {
 public:
  Localizer(const CandidateGrid* grid, const LocalizerParams& params);

  /// EG step when the frame has features, silent decay otherwise; then
  /// spatial smoothing.
  const Eigen::VectorXd& update(const FeatureSet& features);

  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
  [[nodiscard]] std::vector<Peak> peaks() const;
  [[nodiscard]] std::size_t clamp_events() const { return clamp_events_; }

 private:
  const CandidateGrid* grid_;
  LocalizerParams params_;
  Eigen::VectorXd weights_;
  std::size_t clamp_events_ = 0;
};

}  // namespace doatrack

#endif  // DOATRACK_LOCALIZER_HPP
