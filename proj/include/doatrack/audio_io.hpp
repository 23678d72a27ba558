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

#ifndef DOATRACK_AUDIO_IO_HPP
#define DOATRACK_AUDIO_IO_HPP

#include <filesystem>

#include <Eigen/Core>

namespace doatrack {

/// Multichannel real-valued audio. One column per channel.
struct AudioBuffer {
  Eigen::MatrixXd samples;
  double sample_rate = 16000.0;

  [[nodiscard]] Eigen::Index channel_count() const { return samples.cols(); }
  [[nodiscard]] Eigen::Index length() const { return samples.rows(); }
  [[nodiscard]] double duration() const { return static_cast<double>(length()) / sample_rate; }
};

/// Throws InputError unless the buffer has at least two channels, a positive
/// rate and finite samples.
void validate(const AudioBuffer& audio);

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads 16-bit PCM or 32-bit IEEE float WAV files, scaled to [-1, 1).
AudioBuffer read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace doatrack

#endif  // DOATRACK_AUDIO_IO_HPP
