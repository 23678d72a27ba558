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

#include "doatrack/stft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "doatrack/error.hpp"

namespace doatrack {

namespace {

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Eigen::VectorXd hamming_window(Eigen::Index length) {
  Eigen::VectorXd w(length);
  for (Eigen::Index n = 0; n < length; ++n) {
    w(n) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
  }
  return w;
}

Eigen::MatrixXcd Spectrogram::frame(Eigen::Index t) const {
  Eigen::MatrixXcd out(bin_count(), channel_count());
  for (Eigen::Index c = 0; c < channel_count(); ++c) out.col(c) = channels[static_cast<std::size_t>(c)].col(t);
  return out;
}

FrameAnalyzer::FrameAnalyzer(double sample_rate, const StftParams& params) : sample_rate_(sample_rate) {
  if (!(sample_rate > 0.0)) throw InputError("sample rate must be positive");
  const auto window = static_cast<Eigen::Index>(std::lround(params.window_ms * sample_rate / 1000.0));
  hop_ = static_cast<Eigen::Index>(std::lround(params.hop_ms * sample_rate / 1000.0));
  if (window < 2) throw InputError("STFT window shorter than 2 samples");
  if (hop_ < 1 || hop_ > window) {
    throw InputError("STFT hop must be in [1, window]; got hop " + std::to_string(hop_) + " samples, window " +
                     std::to_string(window));
  }
  fft_size_ = next_pow2(window);
  window_ = hamming_window(window);
  time_buf_.assign(static_cast<std::size_t>(fft_size_), 0.0);
  fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
}

Eigen::Index FrameAnalyzer::frame_count(Eigen::Index num_samples) const {
  if (num_samples < window_length()) return 0;
  return (num_samples - window_length()) / hop_ + 1;
}

double FrameAnalyzer::frame_time(Eigen::Index t) const {
  return (static_cast<double>(t * hop_) + 0.5 * static_cast<double>(window_length())) / sample_rate_;
}

Eigen::VectorXcd FrameAnalyzer::transform(const Eigen::Ref<const Eigen::VectorXd>& frame) {
  const Eigen::Index n = window_length();
  for (Eigen::Index i = 0; i < n; ++i) time_buf_[static_cast<std::size_t>(i)] = frame(i) * window_(i);
  fft_.fwd(freq_buf_, time_buf_);
  Eigen::VectorXcd out(bin_count());
  for (Eigen::Index k = 0; k < bin_count(); ++k) out(k) = freq_buf_[static_cast<std::size_t>(k)];
  return out;
}

Eigen::MatrixXcd FrameAnalyzer::analyze_frame(const AudioBuffer& audio, Eigen::Index t) {
  Eigen::MatrixXcd out(bin_count(), audio.channel_count());
  const Eigen::Index start = t * hop_;
  for (Eigen::Index c = 0; c < audio.channel_count(); ++c) {
    out.col(c) = transform(audio.samples.col(c).segment(start, window_length()));
  }
  return out;
}

Spectrogram analyze(const AudioBuffer& audio, double window_ms, double hop_ms) {
  if (!audio.samples.allFinite()) throw InputError("audio contains non-finite samples");
  FrameAnalyzer analyzer(audio.sample_rate, {window_ms, hop_ms});
  const Eigen::Index frames = analyzer.frame_count(audio.length());
  if (frames == 0) {
    throw InputError("empty spectrogram: audio has " + std::to_string(audio.length()) +
                     " samples, shorter than one window of " + std::to_string(analyzer.window_length()));
  }
  Spectrogram spec;
  spec.window_length = analyzer.window_length();
  spec.hop = analyzer.hop();
  spec.fft_size = analyzer.fft_size();
  spec.sample_rate = audio.sample_rate;
  spec.channels.assign(static_cast<std::size_t>(audio.channel_count()),
                       Eigen::MatrixXcd(analyzer.bin_count(), frames));
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index c = 0; c < audio.channel_count(); ++c) {
      spec.channels[static_cast<std::size_t>(c)].col(t) =
          analyzer.transform(audio.samples.col(c).segment(t * analyzer.hop(), analyzer.window_length()));
    }
  }
  return spec;
}

}  // namespace doatrack
