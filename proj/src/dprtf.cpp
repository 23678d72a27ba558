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

#include "doatrack/dprtf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "doatrack/error.hpp"

namespace doatrack {

double forgetting_factor(int channels, int ctf_length, double rho) {
  const double frames = rho * (channels * ctf_length - 1) / pair_count(channels);
  return (frames - 1.0) / (frames + 1.0);
}

void SlidingMinimum::push(double value) {
  while (!window_.empty() && window_.back().second >= value) window_.pop_back();
  window_.emplace_back(count_, value);
  if (window_.front().first + span_ <= count_) window_.pop_front();
  ++count_;
}

PsdState::PsdState(Eigen::Index ctf_length, Eigen::Index channels, double beta_, std::size_t min_span)
    : smoothed(Eigen::MatrixXcd::Zero(ctf_length, channels)),
      noise(Eigen::MatrixXcd::Zero(ctf_length, channels)),
      min_tracker(min_span),
      beta(beta_) {}

void recursive_psd(PsdState& psd, const Eigen::MatrixXcd& conv) {
  const Complex ref_conj = std::conj(conv(0, 0));
  psd.smoothed = psd.beta * psd.smoothed + (1.0 - psd.beta) * (conv * ref_conj);
}

FrameClass classify_frame(PsdState& psd, double kappa) {
  const double power = psd.reference_power();
  psd.min_tracker.push(power);
  return power > kappa * psd.min_tracker.minimum() ? FrameClass::kSpeech : FrameClass::kNoise;
}

std::optional<Eigen::MatrixXcd> spectral_subtract(const PsdState& psd) {
  if (!psd.has_noise) return std::nullopt;
  return Eigen::MatrixXcd(psd.smoothed - psd.noise);
}

double consistency_similarity(Complex a, Complex b) {
  const double num = std::abs(1.0 + std::conj(a) * b);
  return num / std::sqrt((1.0 + std::norm(a)) * (1.0 + std::norm(b)));
}

std::vector<std::pair<int, Complex>> consistency_test(const Eigen::VectorXcd& ref1, const Eigen::VectorXcd& ref2,
                                                      double threshold) {
  std::vector<std::pair<int, Complex>> kept;
  const Complex denom = ref2(0);
  if (std::abs(denom) < 1e-12) return kept;
  for (Eigen::Index k = 0; k < ref1.size(); ++k) {
    const int channel = static_cast<int>(k) + 2;
    const Complex second = channel == 2 ? 1.0 / denom : ref2(channel - 1) / denom;
    if (consistency_similarity(ref1(k), second) > threshold) {
      kept.emplace_back(channel, fuse_estimates(ref1(k), second));
    }
  }
  return kept;
}

// ---------------------------------------------------------------------------

struct DprtfEstimator::BinState {
  Eigen::MatrixXcd conv;  // Q x I, newest frame in row 0
  PsdState psd;
  RlsState<double> ref1;
  RlsState<double> ref2;

  BinState(int q, int channels, double beta, std::size_t span, double lambda)
      : conv(Eigen::MatrixXcd::Zero(q, channels)),
        psd(q, channels, beta, span),
        ref1(RlsState<double>::initial(channels * q - 1, lambda)),
        ref2(RlsState<double>::initial(channels * q - 1, lambda)) {}
};

namespace {

struct BinResult {
  std::vector<std::pair<int, Complex>> features;
  bool speech = false;
  bool skipped_no_noise = false;
  bool degenerate = false;
  int resets = 0;
};

}  // namespace

DprtfEstimator::DprtfEstimator(int channels, Eigen::Index bins, double sample_rate, Eigen::Index fft_size,
                               Eigen::Index hop, const DprtfParams& params, int threads)
    : channels_(channels),
      ctf_length_(params.ctf_length),
      params_(params),
      lambda_(forgetting_factor(channels, params.ctf_length, params.rho)),
      threads_(std::max(1, threads)) {
  if (channels < 2) throw InputError("DP-RTF estimation needs at least 2 channels");
  if (params.ctf_length < 1) throw InputError("ctf_length must be >= 1");
  if (!(params.beta > 0.0 && params.beta < 1.0)) throw InputError("beta must be in (0, 1)");
  if (!(lambda_ > 0.0 && lambda_ <= 1.0)) {
    throw InputError("forgetting factor " + std::to_string(lambda_) +
                     " outside (0, 1]; increase rho or ctf_length");
  }
  const auto span = static_cast<std::size_t>(
      std::max<long>(1, std::lround(params.min_window_s * sample_rate / static_cast<double>(hop))));
  for (Eigen::Index k = 1; k < bins; ++k) {
    const double freq = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
    if (params.band_low_hz > 0.0 && freq <= params.band_low_hz) continue;
    if (params.band_high_hz > 0.0 && freq > params.band_high_hz) continue;
    active_bins_.push_back(static_cast<int>(k));
  }
  bins_.reserve(static_cast<std::size_t>(bins));
  for (Eigen::Index k = 0; k < bins; ++k) bins_.emplace_back(ctf_length_, channels_, params.beta, span, lambda_);
  ref2_order_.resize(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) ref2_order_[static_cast<std::size_t>(c)] = c;
  std::swap(ref2_order_[0], ref2_order_[1]);
}

DprtfEstimator::~DprtfEstimator() = default;
DprtfEstimator::DprtfEstimator(DprtfEstimator&&) noexcept = default;
DprtfEstimator& DprtfEstimator::operator=(DprtfEstimator&&) noexcept = default;

const RlsState<double>& DprtfEstimator::reference_state(int bin) const {
  return bins_.at(static_cast<std::size_t>(bin)).ref1;
}

FeatureSet DprtfEstimator::process(const Eigen::MatrixXcd& frame) {
  if (frame.cols() != channels_ || frame.rows() != static_cast<Eigen::Index>(bins_.size())) {
    throw InputError("frame has shape " + std::to_string(frame.rows()) + "x" + std::to_string(frame.cols()) +
                     ", expected " + std::to_string(bins_.size()) + "x" + std::to_string(channels_));
  }
  std::vector<BinResult> results(active_bins_.size());

  const auto run_bin = [&](std::size_t slot) {
    const int k = active_bins_[slot];
    BinState& bin = bins_[static_cast<std::size_t>(k)];
    BinResult& res = results[slot];
    if (ctf_length_ > 1) {
      bin.conv.bottomRows(ctf_length_ - 1) = bin.conv.topRows(ctf_length_ - 1).eval();
    }
    bin.conv.row(0) = frame.row(k);
    recursive_psd(bin.psd, bin.conv);
    if (classify_frame(bin.psd, params_.kappa) == FrameClass::kNoise) {
      bin.psd.noise = bin.psd.smoothed;
      bin.psd.has_noise = true;
      return;
    }
    res.speech = true;
    const auto clean = spectral_subtract(bin.psd);
    if (!clean) {
      res.skipped_no_noise = true;
      return;
    }
    const auto rows1 = build_cross_relations<double>(*clean);
    const auto rows2 = build_cross_relations<double>(*clean, ref2_order_);
    if (!rls_frame_update(bin.ref1, rows1)) ++res.resets;
    if (!rls_frame_update(bin.ref2, rows2)) ++res.resets;

    const Eigen::VectorXcd c1 = extract_dprtf(bin.ref1, channels_, ctf_length_);
    const Eigen::VectorXcd c2_perm = extract_dprtf(bin.ref2, channels_, ctf_length_);
    // Permuted order is (2, 1, 3, ..., I): its "channel 2" is microphone 1.
    Eigen::VectorXcd c2(channels_);
    c2(0) = c2_perm(0);
    c2(1) = 1.0;
    for (int i = 3; i <= channels_; ++i) c2(i - 1) = c2_perm(i - 2);
    if (std::abs(c2(0)) < 1e-12) {
      res.degenerate = true;
      return;
    }
    res.features = consistency_test(c1, c2, params_.consistency_threshold);
  };

  const std::size_t n = active_bins_.size();
  const auto workers = static_cast<std::size_t>(std::min<long>(threads_, static_cast<long>(n)));
  if (workers <= 1) {
    for (std::size_t s = 0; s < n; ++s) run_bin(s);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < n; s += workers) run_bin(s);
      });
    }
  }

  FeatureSet out;
  out.frame = frame_index_++;
  for (std::size_t s = 0; s < n; ++s) {
    const BinResult& res = results[s];
    diagnostics_.rls_resets += static_cast<std::size_t>(res.resets);
    if (res.speech) {
      ++diagnostics_.speech_bins;
    } else {
      ++diagnostics_.noise_bins;
    }
    if (res.skipped_no_noise) ++diagnostics_.skipped_no_noise;
    if (res.degenerate) ++diagnostics_.degenerate_reference;
    for (const auto& [channel, value] : res.features) out.features.push_back({active_bins_[s], channel, value});
  }
  return out;
}

}  // namespace doatrack
