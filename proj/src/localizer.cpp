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

#include "doatrack/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "doatrack/error.hpp"

namespace doatrack {

Eigen::MatrixXd component_likelihoods(const FeatureSet& features, const CandidateGrid& grid, double sigma2) {
  const int D = grid.size();
  const auto K = static_cast<Eigen::Index>(features.size());
  const double norm = 1.0 / (std::numbers::pi * sigma2);
  Eigen::MatrixXd L(D, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Feature& feat = features.features[static_cast<std::size_t>(k)];
    const auto means = grid.predicted(feat.bin, feat.channel);
    for (int d = 0; d < D; ++d) L(d, k) = norm * std::exp(-std::norm(feat.value - means(d)) / sigma2);
  }
  return L;
}

Eigen::VectorXd nll_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& likelihoods) {
  const Eigen::RowVectorXd mixture = weights.transpose() * likelihoods;
  const auto K = static_cast<double>(likelihoods.cols());
  return -(likelihoods.array().rowwise() / mixture.array()).rowwise().sum().matrix() / K;
}

double entropy(const Eigen::VectorXd& weights) {
  return -(weights.array() * weights.array().log()).sum();
}

Eigen::VectorXd entropy_gradient(const Eigen::VectorXd& weights) {
  return -(1.0 + weights.array().log()).matrix();
}

Eigen::VectorXd eg_update(const Eigen::VectorXd& weights, const Eigen::MatrixXd& likelihoods, double eta,
                          double gamma, std::size_t* clamped) {
  const Eigen::VectorXd grad = nll_gradient(weights, likelihoods) + gamma * entropy_gradient(weights);
  Eigen::VectorXd exponent = -eta * grad;
  for (Eigen::Index d = 0; d < exponent.size(); ++d) {
    if (std::abs(exponent(d)) > kExponentClamp || !std::isfinite(exponent(d))) {
      exponent(d) = std::isnan(exponent(d)) ? 0.0 : std::clamp(exponent(d), -kExponentClamp, kExponentClamp);
      if (clamped != nullptr) ++*clamped;
    }
  }
  // Shifting every exponent by the same amount cancels in the normalization.
  exponent.array() -= exponent.maxCoeff();
  Eigen::VectorXd next = exponent.array().exp() * weights.array();
  // Keep the weights strictly positive so log w stays finite.
  next = next.cwiseMax(kWeightFloor);
  next /= next.sum();
  return next;
}

Eigen::VectorXd silent_decay(const Eigen::VectorXd& weights, double eta_silent) {
  const auto D = static_cast<double>(weights.size());
  return ((1.0 - eta_silent) * weights.array() + eta_silent / D).matrix();
}

Eigen::VectorXd spatial_smooth(const Eigen::VectorXd& weights, double neighbor) {
  const Eigen::Index D = weights.size();
  Eigen::VectorXd out(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    const double prev = weights((d + D - 1) % D);
    const double next = weights((d + 1) % D);
    out(d) = (weights(d) + neighbor * prev + neighbor * next) / (1.0 + 2.0 * neighbor);
  }
  out /= out.sum();
  return out;
}

double circular_distance_deg(double a, double b) {
  double diff = std::fmod(std::abs(a - b), 360.0);
  return diff > 180.0 ? 360.0 - diff : diff;
}

std::vector<Peak> peak_select(const Eigen::VectorXd& weights, const std::vector<double>& azimuths_deg,
                              double threshold, double min_separation_deg) {
  const Eigen::Index D = weights.size();
  std::vector<Peak> candidates;
  for (Eigen::Index d = 0; d < D; ++d) {
    const double w = weights(d);
    if (!(w > threshold)) continue;
    const double prev = weights((d + D - 1) % D);
    const double next = weights((d + 1) % D);
    // Plateaus report their first sample only.
    if (w > prev && w >= next) candidates.push_back({azimuths_deg[static_cast<std::size_t>(d)], w, static_cast<int>(d)});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.weight > b.weight; });
  std::vector<Peak> kept;
  for (const Peak& p : candidates) {
    const bool separated = std::all_of(kept.begin(), kept.end(), [&](const Peak& q) {
      return circular_distance_deg(p.azimuth_deg, q.azimuth_deg) >= min_separation_deg;
    });
    if (separated) kept.push_back(p);
  }
  return kept;
}

Localizer::Localizer(const CandidateGrid* grid, const LocalizerParams& params)
    : grid_(grid), params_(params), weights_(Eigen::VectorXd::Constant(grid->size(), 1.0 / grid->size())) {
  if (!(params.sigma2 > 0.0)) throw InputError("localizer sigma2 must be positive");
  if (!(params.eta > 0.0) || !(params.gamma >= 0.0) || !(params.eta_silent > 0.0)) {
    throw InputError("localizer eta, eta_silent must be positive and gamma non-negative");
  }
}

const Eigen::VectorXd& Localizer::update(const FeatureSet& features) {
  if (features.empty()) {
    weights_ = silent_decay(weights_, params_.eta_silent);
  } else {
    const Eigen::MatrixXd L = component_likelihoods(features, *grid_, params_.sigma2);
    weights_ = eg_update(weights_, L, params_.eta, params_.gamma, &clamp_events_);
  }
  weights_ = spatial_smooth(weights_, params_.smoothing);
  return weights_;
}

std::vector<Peak> Localizer::peaks() const {
  return peak_select(weights_, grid_->azimuths(), params_.peak_threshold, params_.min_separation_deg);
}

}  // namespace doatrack
