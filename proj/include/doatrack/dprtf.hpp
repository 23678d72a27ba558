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

#ifndef DOATRACK_DPRTF_HPP
#define DOATRACK_DPRTF_HPP

#include <complex>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "doatrack/stft.hpp"

namespace doatrack {

template <typename Real>
using VectorXc = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using MatrixXc = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

struct DprtfParams {
  int ctf_length = 8;                   // Q, in frames
  double rho = 1.0;                     // equations per unknown in the RLS memory
  double beta = 0.9;                    // PSD smoothing
  double kappa = 3.0;                   // speech iff PSD > kappa * sliding minimum
  double min_window_s = 1.5;            // sliding-minimum span
  double consistency_threshold = 0.75;
  double band_low_hz = 0.0;             // bins with f <= low are skipped (DC always is)
  double band_high_hz = 0.0;            // 0 means up to Nyquist
};

/// M = I(I-1)/2.
constexpr int pair_count(int channels) { return channels * (channels - 1) / 2; }

/// lambda = (P-1)/(P+1) with P = rho (IQ-1) / (I(I-1)/2) frames of memory.
double forgetting_factor(int channels, int ctf_length, double rho);

// ---------------------------------------------------------------------------
// Recursive least squares over cross-relation equations.

/// One cross-relation equation x^T a = y for a microphone pair.
template <typename Real>
struct CrossRelationRow {
  VectorXc<Real> regressor;
  std::complex<Real> target;
};

/// Relative-CTF estimate and inverse covariance for one frequency bin.
template <typename Real>
struct RlsState {
  VectorXc<Real> ctf;
  MatrixXc<Real> inv_cov;
  Real lambda = Real(1);

  static RlsState initial(Eigen::Index unknowns, Real lambda) {
    return {VectorXc<Real>::Zero(unknowns), MatrixXc<Real>::Identity(unknowns, unknowns), lambda};
  }
};

/// Builds the M cross-relation rows of one (t, f) from per-channel Q-vectors
/// (column c of `vectors` belongs to channel c). The channel order selects
/// which channel's first coefficient is constrained to one: order[0] is the
/// reference. Pair (i, j), i < j in that order, puts vectors[j] in block i and
/// -vectors[i] in block j; the first entry is dropped and negated into the
/// target.
template <typename Real>
std::vector<CrossRelationRow<Real>> build_cross_relations(const MatrixXc<Real>& vectors,
                                                          std::span<const int> channel_order) {
  const Eigen::Index q = vectors.rows();
  const auto channels = static_cast<Eigen::Index>(channel_order.size());
  const Eigen::Index unknowns = channels * q - 1;
  std::vector<CrossRelationRow<Real>> rows;
  rows.reserve(static_cast<std::size_t>(pair_count(static_cast<int>(channels))));
  VectorXc<Real> full(channels * q);
  for (Eigen::Index i = 0; i + 1 < channels; ++i) {
    for (Eigen::Index j = i + 1; j < channels; ++j) {
      full.setZero();
      full.segment(i * q, q) = vectors.col(channel_order[static_cast<std::size_t>(j)]);
      full.segment(j * q, q) = -vectors.col(channel_order[static_cast<std::size_t>(i)]);
      rows.push_back({full.tail(unknowns), -full(0)});
    }
  }
  return rows;
}

template <typename Real>
std::vector<CrossRelationRow<Real>> build_cross_relations(const MatrixXc<Real>& vectors) {
  std::vector<int> order(static_cast<std::size_t>(vectors.cols()));
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
  return build_cross_relations<Real>(vectors, order);
}

/// One frame of RLS: carry in P/lambda, then one Sherman-Morrison update per
/// pair in order. The state after the call is the pair-M estimate of this
/// frame. Returns false when a non-finite gain forced P back to identity.
template <typename Real>
bool rls_frame_update(RlsState<Real>& state, std::span<const CrossRelationRow<Real>> rows) {
  using C = std::complex<Real>;
  bool healthy = true;
  // P is Hermitian: only its lower triangle is touched inside the frame, and
  // the sparse regressors (2Q - 1 nonzeros) only read the matching columns.
  auto& P = state.inv_cov;
  const Eigen::Index n = P.rows();
  P /= state.lambda;
  VectorXc<Real> h(n);
  std::vector<Eigen::Index> support;
  support.reserve(static_cast<std::size_t>(n));
  for (const auto& row : rows) {
    const VectorXc<Real> xc = row.regressor.conjugate();
    support.clear();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (xc(k) != C(0)) support.push_back(k);
    }
    C err = row.target;
    h.setZero();
    for (const Eigen::Index k : support) {
      err -= row.regressor(k) * state.ctf(k);
      h.tail(n - k).noalias() += P.col(k).tail(n - k) * xc(k);
      h.head(k).noalias() += P.row(k).head(k).adjoint() * xc(k);
    }
    // 1 + x^T P x* is real for Hermitian P.
    const Real denom = Real(1) + xc.dot(h).real();
    if (!std::isfinite(denom) || std::abs(denom) < Real(1e-12)) {
      P.setIdentity();
      healthy = false;
      continue;
    }
    const VectorXc<Real> g = h / denom;
    for (Eigen::Index c = 0; c < n; ++c) P.col(c).tail(n - c).noalias() -= g.tail(n - c) * std::conj(h(c));
    state.ctf += err * g;
  }
  // Mirror the lower triangle and drop the imaginary rounding residue on the
  // diagonal. Left alone, that anti-Hermitian part grows by 1/lambda a frame.
  for (Eigen::Index c = 0; c < n; ++c) {
    P(c, c) = C(P(c, c).real(), Real(0));
    P.row(c).tail(n - c - 1) = P.col(c).tail(n - c - 1).adjoint();
  }
  if (!P.allFinite() || !state.ctf.allFinite()) {
    P.setIdentity();
    if (!state.ctf.allFinite()) state.ctf.setZero();
    healthy = false;
  }
  return healthy;
}

template <typename Real>
bool rls_frame_update(RlsState<Real>& state, const std::vector<CrossRelationRow<Real>>& rows) {
  return rls_frame_update<Real>(state, std::span<const CrossRelationRow<Real>>(rows));
}

/// DP-RTFs of channels 2..I (in the estimate's channel order) from the
/// relative-CTF layout: block 1 holds Q-1 entries, each later block Q.
template <typename Real>
VectorXc<Real> extract_dprtf(const RlsState<Real>& state, int channels, int ctf_length) {
  VectorXc<Real> out(channels - 1);
  for (int i = 2; i <= channels; ++i) out(i - 2) = state.ctf((ctf_length - 1) + (i - 2) * ctf_length);
  return out;
}

// ---------------------------------------------------------------------------
// Noise handling.

/// Exact minimum over the last `span` pushed values.
class SlidingMinimum {
 public:
  explicit SlidingMinimum(std::size_t span = 1) : span_(span) {}
  void push(double value);
  [[nodiscard]] double minimum() const { return window_.front().second; }
  [[nodiscard]] bool empty() const { return window_.empty(); }

 private:
  std::size_t span_;
  std::size_t count_ = 0;
  std::deque<std::pair<std::size_t, double>> window_;
};

/// Smoothed cross-/auto-PSD between each channel's convolution vector and the
/// current reference coefficient, plus the noise snapshot for one bin.
struct PsdState {
  Eigen::MatrixXcd smoothed;  // Q x I
  Eigen::MatrixXcd noise;     // smoothed PSD at the latest noise frame
  bool has_noise = false;
  SlidingMinimum min_tracker;
  double beta = 0.9;

  PsdState(Eigen::Index ctf_length, Eigen::Index channels, double beta, std::size_t min_span);
  /// Real part of the reference auto-PSD, the first entry of phi^1.
  [[nodiscard]] double reference_power() const { return smoothed(0, 0).real(); }
};

/// phi^i <- beta phi^i + (1 - beta) x^i conj(x^1_t) for every channel, where
/// column i of `conv` is channel i's convolution vector (newest frame first).
void recursive_psd(PsdState& psd, const Eigen::MatrixXcd& conv);

enum class FrameClass { kNoise, kSpeech };

/// Pushes the current reference power into the minimum tracker and classifies
/// it. Speech iff power > kappa * minimum (strict).
FrameClass classify_frame(PsdState& psd, double kappa);

/// Current PSD minus the latest noise snapshot, or nothing before any noise
/// frame has been seen.
std::optional<Eigen::MatrixXcd> spectral_subtract(const PsdState& psd);

// ---------------------------------------------------------------------------
// Consistency test and fusion.

/// Cosine similarity |c1^H c2| / (|c1| |c2|) of c1 = (1, a) and c2 = (1, b).
double consistency_similarity(Complex a, Complex b);

/// c -> c / sqrt(1 + |c|^2); maps the plane into the open unit disk.
inline Complex normalize_feature(Complex c) { return c / std::sqrt(1.0 + std::norm(c)); }

/// Averages the two estimates and normalizes the result.
inline Complex fuse_estimates(Complex a, Complex b) { return normalize_feature(0.5 * (a + b)); }

struct Feature {
  int bin = 0;
  int channel = 0;  // 1-based microphone index, >= 2
  Complex value;
};

struct FeatureSet {
  Eigen::Index frame = 0;
  std::vector<Feature> features;

  [[nodiscard]] bool empty() const { return features.empty(); }
  [[nodiscard]] std::size_t size() const { return features.size(); }
};

/// Consistency test for one bin. `ref1` holds c~^i for i = 2..I; `ref2` holds
/// cbar^i for i = 1..I with the entry of channel 2 ignored (it is 1). Returns
/// (channel, fused feature) for every channel that passes; empty when
/// |cbar^1| < 1e-12.
std::vector<std::pair<int, Complex>> consistency_test(const Eigen::VectorXcd& ref1, const Eigen::VectorXcd& ref2,
                                                      double threshold);

// ---------------------------------------------------------------------------
// Streaming estimator.

struct DprtfDiagnostics {
  std::size_t rls_resets = 0;
  std::size_t speech_bins = 0;
  std::size_t noise_bins = 0;
  std::size_t skipped_no_noise = 0;
  std::size_t degenerate_reference = 0;
};

/// Online DP-RTF feature extraction, one STFT frame at a time. Bins are
/// independent and processed in parallel when `threads > 1`.
class DprtfEstimator {
 public:
  DprtfEstimator(int channels, Eigen::Index bins, double sample_rate, Eigen::Index fft_size, Eigen::Index hop,
                 const DprtfParams& params, int threads = 1);
  ~DprtfEstimator();
  DprtfEstimator(DprtfEstimator&&) noexcept;
  DprtfEstimator& operator=(DprtfEstimator&&) noexcept;

  /// Consumes one frame, (bins x channels), and returns the validated features.
  FeatureSet process(const Eigen::MatrixXcd& frame);

  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] const DprtfDiagnostics& diagnostics() const { return diagnostics_; }
  [[nodiscard]] const std::vector<int>& active_bins() const { return active_bins_; }
  /// Reference-1 RLS state of a bin, for inspection.
  [[nodiscard]] const RlsState<double>& reference_state(int bin) const;

  struct BinState;

 private:
  int channels_;
  int ctf_length_;
  DprtfParams params_;
  double lambda_;
  Eigen::Index frame_index_ = 0;
  std::vector<int> active_bins_;
  std::vector<BinState> bins_;
  std::vector<int> ref2_order_;
  int threads_;
  DprtfDiagnostics diagnostics_;
};

}  // namespace doatrack

#endif  // DOATRACK_DPRTF_HPP
