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

#ifndef DOATRACK_STFT_HPP
#define DOATRACK_STFT_HPP

#include <complex>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "doatrack/audio_io.hpp"

namespace doatrack {

using Complex = std::complex<double>;

struct StftParams {
  double window_ms = 16.0;
  double hop_ms = 8.0;
};

/// Periodic Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / N).
Eigen::VectorXd hamming_window(Eigen::Index length);

/// Complex STFT coefficients, one (bins x frames) matrix per channel.
struct Spectrogram {
  std::vector<Eigen::MatrixXcd> channels;
  Eigen::Index window_length = 0;
  Eigen::Index hop = 0;
  Eigen::Index fft_size = 0;
  double sample_rate = 0.0;

  [[nodiscard]] Eigen::Index channel_count() const { return static_cast<Eigen::Index>(channels.size()); }
  [[nodiscard]] Eigen::Index bin_count() const { return fft_size / 2 + 1; }
  [[nodiscard]] Eigen::Index frame_count() const { return channels.empty() ? 0 : channels.front().cols(); }
  /// All channels at frame t, as a (bins x channels) matrix.
  [[nodiscard]] Eigen::MatrixXcd frame(Eigen::Index t) const;
};

/// Frame-at-a-time analysis. Owns the FFT plan, so one instance per thread.
class FrameAnalyzer {
 public:
  FrameAnalyzer(double sample_rate, const StftParams& params);

  [[nodiscard]] Eigen::Index window_length() const { return window_.size(); }
  [[nodiscard]] Eigen::Index hop() const { return hop_; }
  [[nodiscard]] Eigen::Index fft_size() const { return fft_size_; }
  [[nodiscard]] Eigen::Index bin_count() const { return fft_size_ / 2 + 1; }
  [[nodiscard]] double sample_rate() const { return sample_rate_; }
  [[nodiscard]] const Eigen::VectorXd& window() const { return window_; }

  /// floor((num_samples - window) / hop) + 1, or 0 when shorter than a window.
  [[nodiscard]] Eigen::Index frame_count(Eigen::Index num_samples) const;

  /// Center time of frame t in seconds.
  [[nodiscard]] double frame_time(Eigen::Index t) const;

  /// One-sided spectrum of frame t for every channel, (bins x channels).
  [[nodiscard]] Eigen::MatrixXcd analyze_frame(const AudioBuffer& audio, Eigen::Index t);

  /// One-sided spectrum of an already-extracted frame of window_length() samples.
  [[nodiscard]] Eigen::VectorXcd transform(const Eigen::Ref<const Eigen::VectorXd>& frame);

 private:
  double sample_rate_;
  Eigen::Index hop_;
  Eigen::Index fft_size_;
  Eigen::VectorXd window_;
  Eigen::FFT<double> fft_;
  std::vector<double> time_buf_;
  std::vector<Complex> freq_buf_;
};

/// Hamming-windowed one-sided STFT of every channel. Throws InputError on
/// non-finite samples or audio shorter than one window.
Spectrogram analyze(const AudioBuffer& audio, double window_ms = 16.0, double hop_ms = 8.0);

}  // namespace doatrack

#endif  // DOATRACK_STFT_HPP
