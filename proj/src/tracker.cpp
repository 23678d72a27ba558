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

#include "doatrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doatrack/error.hpp"

namespace doatrack {

ObservationSet make_observations(const Eigen::VectorXd& weights, std::span<const double> azimuths_deg) {
  ObservationSet obs;
  const Eigen::Index D = weights.size();
  obs.directions.resize(2, D);
  for (Eigen::Index d = 0; d < D; ++d) {
    const double a = azimuths_deg[static_cast<std::size_t>(d)] * std::numbers::pi / 180.0;
    obs.directions.col(d) << std::cos(a), std::sin(a);
  }
  obs.weights = weights;
  return obs;
}

double birth_score(const BirthEvaluation<double>& evaluation, BirthScore score, double outlier_density) {
  const auto& lp = evaluation.log_predictive;
  if (lp.size() < 2) return 0.0;
  const double conditional = std::accumulate(lp.begin() + 1, lp.end(), 0.0);
  const auto terms = static_cast<double>(lp.size() - 1);
  if (score == BirthScore::kGeometricMean) return std::exp(conditional / terms);
  // Posterior probability of the speaker hypothesis against uniform clutter,
  // both conditioned on the first observation.
  const double log_ratio = terms * std::log(outlier_density) - conditional;
  return 1.0 / (1.0 + std::exp(std::clamp(log_ratio, -700.0, 700.0)));
}

bool activity_detect(std::span<const double> masses, double threshold) {
  return std::accumulate(masses.begin(), masses.end(), 0.0) > threshold;
}

Tracker::Tracker(const TrackerParams& params) : params_(params) {
  if (!(params.step_s > 0.0)) throw InputError("tracker step_s must be positive");
  if (params.obs_cov.determinant() <= 0.0 || params.obs_cov(0, 0) <= 0.0) {
    throw InputError("tracker observation covariance must be positive definite");
  }
  if (params.iterations < 1) throw InputError("tracker iterations must be >= 1");
  if (params.birth_window < 1) throw InputError("tracker birth_window must be >= 1");
  if (params.activity_window < 1) throw InputError("tracker activity_window must be >= 1");
}

TrackerFrame Tracker::step(const ObservationSet& obs) {
  const auto N = tracks_.size();
  std::vector<GaussianState<double>> propagated(N);  // D mu_prev, D Gamma_prev D^T
  std::vector<GaussianState<double>> current(N);
  for (std::size_t n = 0; n < N; ++n) {
    const Track& tr = tracks_[n];
    const Eigen::Matrix3d d = transition_matrix<double>(tr.state.mean, params_.step_s);
    propagated[n] = {d * tr.state.mean, d * tr.state.cov * d.transpose()};
    current[n] = predict<double>(tr.state, tr.dynamics_cov, params_.step_s);
  }

  Eigen::MatrixXd alpha;
  for (int iter = 0; iter < params_.iterations; ++iter) {
    alpha = e_z_step<double>(std::span<const GaussianState<double>>(current), obs, params_.obs_cov,
                             params_.outlier_density, &diagnostics_.ez_underflows);
    for (std::size_t n = 0; n < N; ++n) {
      const GaussianState<double> prior{propagated[n].mean, propagated[n].cov + tracks_[n].dynamics_cov};
      bool regularized = false;
      const Eigen::VectorXd resp = alpha.col(static_cast<Eigen::Index>(n) + 1);
      current[n] = e_s_step<double>(prior, obs, resp, params_.obs_cov, &regularized);
      if (regularized) ++diagnostics_.es_regularized;
    }
    for (std::size_t n = 0; n < N; ++n) tracks_[n].dynamics_cov = m_step<double>(current[n], propagated[n]);
  }
  if (N == 0) {
    alpha = Eigen::MatrixXd::Zero(obs.size(), 1);
    alpha.col(0).setOnes();
  }
  for (std::size_t n = 0; n < N; ++n) tracks_[n].state = current[n];

  TrackerFrame frame;
  frame.step = step_;
  frame.assignments = alpha;

  // Activity of existing tracks from this frame's assignments.
  for (std::size_t n = 0; n < N; ++n) {
    Track& tr = tracks_[n];
    tr.activity_mass.push_back(alpha.col(static_cast<Eigen::Index>(n) + 1).dot(obs.weights));
    while (static_cast<int>(tr.activity_mass.size()) > params_.activity_window) tr.activity_mass.pop_front();
    const std::vector<double> masses(tr.activity_mass.begin(), tr.activity_mass.end());
    tr.active = activity_detect(masses, params_.activity_threshold);
    if (tr.active) tr.last_active_step = step_;
  }

  // Birth candidate: the heaviest observation whose best assignment is the
  // outlier class.
  std::optional<Candidate> candidate;
  for (Eigen::Index d = 0; d < obs.size(); ++d) {
    Eigen::Index best = 0;
    alpha.row(d).maxCoeff(&best);
    if (best != 0) continue;
    if (!candidate || obs.weights(d) > candidate->weight) {
      candidate = Candidate{obs.directions.col(d), obs.weights(d)};
    }
  }
  birth_buffer_.push_back(candidate);
  while (static_cast<int>(birth_buffer_.size()) > params_.birth_window + 1) birth_buffer_.pop_front();

  const bool window_full = static_cast<int>(birth_buffer_.size()) == params_.birth_window + 1 &&
                           std::all_of(birth_buffer_.begin(), birth_buffer_.end(),
                                       [](const auto& c) { return c.has_value() && c->weight > 0.0; });
  if (window_full && static_cast<int>(tracks_.size()) < params_.max_speakers) {
    std::vector<Vec2<double>> dirs;
    std::vector<double> weights;
    for (const auto& c : birth_buffer_) {
      dirs.push_back(c->direction);
      weights.push_back(c->weight);
    }
    const Eigen::Matrix3d dyn = params_.birth_dynamics_var * Eigen::Matrix3d::Identity();
    const auto eval = evaluate_birth_sequence<double>(dirs, weights, params_.obs_cov, params_.step_s,
                                                      params_.birth_prior_var, dyn);
    const double score = birth_score(eval, params_.birth_score, params_.outlier_density);
    frame.birth_score = score;
    if (score > params_.birth_threshold) {
      Track tr;
      tr.id = next_id_++;
      tr.state = eval.posterior;
      tr.dynamics_cov = dyn;
      tr.birth_step = step_;
      tr.last_active_step = step_;
      const auto take = std::min<std::size_t>(weights.size(), static_cast<std::size_t>(params_.activity_window));
      tr.activity_mass.assign(weights.end() - static_cast<std::ptrdiff_t>(take), weights.end());
      const std::vector<double> masses(tr.activity_mass.begin(), tr.activity_mass.end());
      tr.active = activity_detect(masses, params_.activity_threshold);
      tracks_.push_back(std::move(tr));
      birth_buffer_.clear();
      ++diagnostics_.births;
    }
  }

  if (params_.prune_after_steps > 0) {
    const auto before = tracks_.size();
    std::erase_if(tracks_, [&](const Track& tr) { return step_ - tr.last_active_step > params_.prune_after_steps; });
    diagnostics_.prunes += before - tracks_.size();
  }

  frame.tracks = tracks_;
  ++step_;
  return frame;
}

}  // namespace doatrack
