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

#ifndef DOATRACK_TRACKER_HPP
#define DOATRACK_TRACKER_HPP

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace doatrack {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Gaussian over the state [cos az; sin az; angular velocity (rad/s)].
template <typename Scalar>
struct GaussianState {
  Vec3<Scalar> mean;
  Mat3<Scalar> cov;
};

/// Projection of the state onto the direction plane, M = [I2 | 0].
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> direction_projection() {
  Eigen::Matrix<Scalar, 2, 3> m = Eigen::Matrix<Scalar, 2, 3>::Zero();
  m(0, 0) = Scalar(1);
  m(1, 1) = Scalar(1);
  return m;
}

/// Linearized constant-angular-velocity transition about the azimuth of
/// `mean`: identity plus third column (-sin az dt, cos az dt, 1).
template <typename Scalar>
Mat3<Scalar> transition_matrix(const Vec3<Scalar>& mean, Scalar dt) {
  using std::atan2, std::cos, std::sin;
  const Scalar az = atan2(mean(1), mean(0));
  Mat3<Scalar> d = Mat3<Scalar>::Identity();
  d(0, 2) = -sin(az) * dt;
  d(1, 2) = cos(az) * dt;
  return d;
}

/// N(D mu, D Gamma D^T + Lambda) with D taken about the previous mean.
template <typename Scalar>
GaussianState<Scalar> predict(const GaussianState<Scalar>& previous, const Mat3<Scalar>& dynamics_cov, Scalar dt) {
  const Mat3<Scalar> d = transition_matrix<Scalar>(previous.mean, dt);
  Mat3<Scalar> cov = d * previous.cov * d.transpose() + dynamics_cov;
  cov = (cov + cov.transpose()).eval() * Scalar(0.5);
  return {d * previous.mean, cov};
}

/// Rescales the direction part of the mean to unit norm.
template <typename Scalar>
void normalize_direction(Vec3<Scalar>& mean) {
  const Scalar n = mean.template head<2>().norm();
  if (n > Scalar(0)) mean.template head<2>() /= n;
}

/// Inverse of a symmetric 3x3 matrix; adds 1e-8 I and retries when the
/// Cholesky factorization fails. Sets *regularized in that case.
template <typename Scalar>
Mat3<Scalar> symmetric_inverse(const Mat3<Scalar>& a, bool* regularized = nullptr) {
  Eigen::LLT<Mat3<Scalar>> llt(a);
  if (llt.info() == Eigen::Success) {
    const Mat3<Scalar> inv = llt.solve(Mat3<Scalar>::Identity());
    if (inv.allFinite()) return (inv + inv.transpose()) * Scalar(0.5);
  }
  if (regularized != nullptr) *regularized = true;
  Eigen::LLT<Mat3<Scalar>> reg(a + Scalar(1e-8) * Mat3<Scalar>::Identity());
  const Mat3<Scalar> inv = reg.solve(Mat3<Scalar>::Identity());
  return (inv + inv.transpose()) * Scalar(0.5);
}

/// Weighted direction observations: unit vectors b_d and weights w_d.
template <typename Scalar>
struct Observations {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> directions;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  [[nodiscard]] Eigen::Index size() const { return weights.size(); }
};

using ObservationSet = Observations<double>;

/// Observation set of a localizer weight vector over its candidate azimuths.
ObservationSet make_observations(const Eigen::VectorXd& weights, std::span<const double> azimuths_deg);

/// Variational posterior of one track's state given the predicted prior
/// N(D mu_prev, D Gamma_prev D^T + Lambda) and the assignment-weighted
/// observations: precision mass * M^T S^-1 M + P^-1, information
/// M^T S^-1 sum + P^-1 m. The direction part of the mean is renormalized.
template <typename Scalar>
GaussianState<Scalar> e_s_step(const GaussianState<Scalar>& prior, const Mat2<Scalar>& obs_cov, Scalar mass,
                               const Vec2<Scalar>& weighted_sum, bool* regularized = nullptr) {
  const Eigen::Matrix<Scalar, 2, 3> m = direction_projection<Scalar>();
  const Mat2<Scalar> obs_info = obs_cov.inverse();
  const Mat3<Scalar> prior_info = symmetric_inverse<Scalar>(prior.cov, regularized);
  const Mat3<Scalar> precision = mass * m.transpose() * obs_info * m + prior_info;
  GaussianState<Scalar> post;
  post.cov = symmetric_inverse<Scalar>(precision, regularized);
  post.mean = post.cov * (m.transpose() * obs_info * weighted_sum + prior_info * prior.mean);
  normalize_direction(post.mean);
  return post;
}

/// Overload accumulating sum_d alpha_d w_d and sum_d alpha_d w_d b_d.
template <typename Scalar>
GaussianState<Scalar> e_s_step(const GaussianState<Scalar>& prior, const Observations<Scalar>& obs,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& responsibilities,
                               const Mat2<Scalar>& obs_cov, bool* regularized = nullptr) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> aw = responsibilities.cwiseProduct(obs.weights);
  return e_s_step<Scalar>(prior, obs_cov, aw.sum(), obs.directions * aw, regularized);
}

/// log N(b; M mu, S / w) - 0.5 tr(w M^T S^-1 M Gamma): the log of the
/// variational assignment score of a track.
template <typename Scalar>
Scalar log_assignment_score(const Vec2<Scalar>& direction, Scalar weight, const GaussianState<Scalar>& state,
                            const Mat2<Scalar>& obs_cov) {
  using std::log;
  if (!(weight > Scalar(0))) return -std::numeric_limits<Scalar>::infinity();
  const Mat2<Scalar> info = obs_cov.inverse();
  const Vec2<Scalar> r = direction - state.mean.template head<2>();
  const Scalar maha = weight * r.dot(info * r);
  const Scalar log_det = log(obs_cov.determinant()) - Scalar(2) * log(weight);
  const Scalar log_gauss = -log(Scalar(2) * std::numbers::pi_v<Scalar>) - Scalar(0.5) * log_det - Scalar(0.5) * maha;
  const Scalar trace = weight * (info * state.cov.template topLeftCorner<2, 2>()).trace();
  return log_gauss - Scalar(0.5) * trace;
}

/// Assignment posterior, (D x (tracks + 1)); column 0 is the outlier class.
/// Priors are uniform and cancel. Rows whose scores all vanish go to the
/// outlier class and increment *underflows.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> e_z_step(std::span<const GaussianState<Scalar>> tracks,
                                                                const Observations<Scalar>& obs,
                                                                const Mat2<Scalar>& obs_cov,
                                                                Scalar outlier_density,
                                                                std::size_t* underflows = nullptr) {
  using std::exp, std::log;
  const Eigen::Index D = obs.size();
  const auto N = static_cast<Eigen::Index>(tracks.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> alpha(D, N + 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logs(N + 1);
  const Scalar log_outlier = log(outlier_density);
  for (Eigen::Index d = 0; d < D; ++d) {
    logs(0) = log_outlier;
    for (Eigen::Index n = 0; n < N; ++n) {
      logs(n + 1) = log_assignment_score<Scalar>(obs.directions.col(d), obs.weights(d),
                                                 tracks[static_cast<std::size_t>(n)], obs_cov);
    }
    const Scalar top = logs.maxCoeff();
    if (!std::isfinite(static_cast<double>(top))) {
      alpha.row(d).setZero();
      alpha(d, 0) = Scalar(1);
      if (underflows != nullptr) ++*underflows;
      continue;
    }
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logs.array() - top).exp();
    alpha.row(d) = (e / e.sum()).transpose();
  }
  return alpha;
}

/// Dynamics covariance maximizing the expected log prior:
/// Gamma_t - D Gamma_prev D^T + (mu_t - D mu_prev)(mu_t - D mu_prev)^T,
/// projected onto the PSD cone by clamping eigenvalues at `floor`.
template <typename Scalar>
Mat3<Scalar> m_step(const GaussianState<Scalar>& posterior, const GaussianState<Scalar>& propagated,
                    Scalar floor = Scalar(1e-8)) {
  const Vec3<Scalar> innovation = posterior.mean - propagated.mean;
  Mat3<Scalar> raw = posterior.cov - propagated.cov + innovation * innovation.transpose();
  raw = (raw + raw.transpose()).eval() * Scalar(0.5);
  Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> eig(raw);
  const Vec3<Scalar> clamped = eig.eigenvalues().cwiseMax(floor);
  Mat3<Scalar> out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return (out + out.transpose()) * Scalar(0.5);
}

/// Sequential Gaussian filtering of a candidate observation sequence under
/// the tracker's own model, from a broad prior N(0, prior_var I).
template <typename Scalar>
struct BirthEvaluation {
  std::vector<Scalar> log_predictive;  // one per observation, first uses the prior
  GaussianState<Scalar> posterior;
};

template <typename Scalar>
BirthEvaluation<Scalar> evaluate_birth_sequence(std::span<const Vec2<Scalar>> directions,
                                                std::span<const Scalar> weights, const Mat2<Scalar>& obs_cov,
                                                Scalar dt, Scalar prior_var, const Mat3<Scalar>& dynamics_cov) {
  using std::log;
  const Eigen::Matrix<Scalar, 2, 3> m = direction_projection<Scalar>();
  BirthEvaluation<Scalar> out;
  GaussianState<Scalar> state{Vec3<Scalar>::Zero(), prior_var * Mat3<Scalar>::Identity()};
  for (std::size_t i = 0; i < directions.size(); ++i) {
    if (i > 0) state = predict<Scalar>(state, dynamics_cov, dt);
    const Mat2<Scalar> innov_cov = m * state.cov * m.transpose() + obs_cov / weights[i];
    const Vec2<Scalar> r = directions[i] - m * state.mean;
    const Eigen::LLT<Mat2<Scalar>> llt(innov_cov);
    const Scalar log_det = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Scalar maha = r.dot(llt.solve(r));
    out.log_predictive.push_back(-log(Scalar(2) * std::numbers::pi_v<Scalar>) - Scalar(0.5) * log_det -
                                 Scalar(0.5) * maha);
    const Eigen::Matrix<Scalar, 3, 2> gain = state.cov * m.transpose() * llt.solve(Mat2<Scalar>::Identity());
    state.mean += gain * r;
    state.cov = (Mat3<Scalar>::Identity() - gain * m) * state.cov;
    state.cov = (state.cov + state.cov.transpose()).eval() * Scalar(0.5);
    normalize_direction(state.mean);
  }
  out.posterior = state;
  return out;
}

enum class BirthScore {
  kGeometricMean,    // exp(mean log p(o_i | o_<i)) over the conditional terms
  kClutterPosterior  // p(seq | speaker) / (p(seq | speaker) + p(seq | clutter))
};

/// Scalar birth statistic of a filtered candidate sequence. The first
/// predictive term depends only on the arbitrary broad prior and is left out.
double birth_score(const BirthEvaluation<double>& evaluation, BirthScore score, double outlier_density);

/// Speaker is active iff the summed assignment-weighted mass over the window
/// exceeds the threshold.
bool activity_detect(std::span<const double> masses, double threshold);

struct TrackerParams {
  Eigen::Matrix2d obs_cov = 0.03 * Eigen::Matrix2d::Identity();
  int max_speakers = 5;
  double step_s = 0.032;
  double outlier_density = 1.0 / (2.0 * std::numbers::pi);
  int iterations = 5;
  int birth_window = 3;  // L; the test uses L + 1 observations
  double birth_threshold = 0.75;
  double birth_prior_var = 1e4;
  double birth_dynamics_var = 1e-3;
  BirthScore birth_score = BirthScore::kClutterPosterior;
  int activity_window = 3;
  double activity_threshold = 0.15;
  int prune_after_steps = 0;  // 0 disables pruning
};

struct Track {
  int id = 0;
  GaussianState<double> state;
  Eigen::Matrix3d dynamics_cov = Eigen::Matrix3d::Identity();
  long birth_step = 0;
  long last_active_step = 0;
  bool active = false;
  std::deque<double> activity_mass;

  [[nodiscard]] double azimuth_deg() const {
    return std::atan2(state.mean(1), state.mean(0)) * 180.0 / std::numbers::pi;
  }
  [[nodiscard]] double velocity_deg_s() const { return state.mean(2) * 180.0 / std::numbers::pi; }
};

struct TrackerDiagnostics {
  std::size_t births = 0;
  std::size_t prunes = 0;
  std::size_t ez_underflows = 0;
  std::size_t es_regularized = 0;
};

/// Result of one VEM frame.
struct TrackerFrame {
  long step = 0;
  std::vector<Track> tracks;
  Eigen::MatrixXd assignments;  // (D x (tracks + 1)) before births
  std::optional<double> birth_score;
};

/// Variational-EM multi-speaker tracker over weighted direction observations.
class Tracker {
 public:
  explicit Tracker(const TrackerParams& params);

  /// Runs the VEM iterations, the birth test and activity detection.
  TrackerFrame step(const ObservationSet& obs);

  [[nodiscard]] const std::vector<Track>& tracks() const { return tracks_; }
  [[nodiscard]] const TrackerDiagnostics& diagnostics() const { return diagnostics_; }
  [[nodiscard]] const TrackerParams& params() const { return params_; }

 private:
  struct Candidate {
    Vec2<double> direction;
    double weight;
  };

  TrackerParams params_;
  std::vector<Track> tracks_;
  std::deque<std::optional<Candidate>> birth_buffer_;
  long step_ = 0;
  int next_id_ = 1;
  TrackerDiagnostics diagnostics_;
};

}  // namespace doatrack

#endif  // DOATRACK_TRACKER_HPP
