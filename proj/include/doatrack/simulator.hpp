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

#ifndef DOATRACK_SIMULATOR_HPP
#define DOATRACK_SIMULATOR_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "doatrack/audio_io.hpp"
#include "doatrack/steering.hpp"
#include "doatrack/stft.hpp"

namespace doatrack {

enum class ExcitationType {
  kWhite,          // white Gaussian noise
  kSpeechShaped,   // white noise through a one-pole low-pass at 500 Hz
  kHarmonic,       // voiced-speech surrogate: glottal harmonics with syllabic gating
  kWav             // first channel of a WAV file, looped
};

struct Excitation {
  ExcitationType type = ExcitationType::kHarmonic;
  std::filesystem::path path;  // kWav only
  double f0_hz = 120.0;        // kHarmonic only
};

struct SourceSpec {
  /// (time s, azimuth deg) breakpoints; linear in between, constant outside.
  std::vector<std::pair<double, double>> trajectory;
  /// Active intervals (start s, end s).
  std::vector<std::pair<double, double>> activity;
  Excitation excitation;
  double gain = 1.0;

  [[nodiscard]] double azimuth_at(double t) const;
  [[nodiscard]] bool active_at(double t) const;
};

struct ReverbSpec {
  bool enabled = false;
  double decay_s = 0.3;  // tau_rev of the tap magnitudes exp(-q hop / tau_rev)
  double drr_db = 10.0;  // direct-to-reverberant energy ratio
  int taps = 8;          // CTF length including the direct-path tap
};

enum class NoiseType { kWhite, kWav };

struct NoiseSpec {
  NoiseType type = NoiseType::kWhite;
  std::optional<double> snr_db;      // relative to the source images over active samples
  std::optional<double> level_dbfs;  // absolute RMS level; used when snr_db is absent
  std::filesystem::path path;        // kWav only
};

struct SceneSpec {
  std::vector<SourceSpec> sources;
  ArrayGeometry geometry;
  ReverbSpec reverb;
  NoiseSpec noise;
  double duration_s = 10.0;
  double sample_rate = 16000.0;
  std::uint64_t seed = 1;
  StftParams analysis;
};

/// Reads a scene JSON file. Relative paths inside resolve against its directory.
SceneSpec load_scene(const std::filesystem::path& path);

struct SourceTruth {
  std::vector<double> azimuth_deg;  // per STFT frame
  std::vector<bool> active;         // per STFT frame
  /// Planted CTF per channel: (bins x taps), present when reverb is on. Tap 0
  /// is the direct path at the source's initial azimuth.
  std::vector<Eigen::MatrixXcd> planted_ctf;
};

struct GroundTruth {
  double sample_rate = 16000.0;
  Eigen::Index window_length = 0;
  Eigen::Index hop = 0;
  Eigen::Index fft_size = 0;
  std::vector<double> frame_times;  // frame centers, seconds
  std::vector<SourceTruth> sources;

  [[nodiscard]] Eigen::Index frame_count() const { return static_cast<Eigen::Index>(frame_times.size()); }
  [[nodiscard]] std::size_t active_frame_count() const;
  /// Frame index whose center is closest to t.
  [[nodiscard]] Eigen::Index frame_at(double t) const;
};

/// Renders the scene to multichannel audio plus frame-aligned ground truth.
/// Deterministic under spec.seed. Throws InputError when the target SNR
/// cannot be reached (no active source energy).
std::pair<AudioBuffer, GroundTruth> render(const SceneSpec& spec);

/// Renders the scene directly in the STFT domain under the CTF model:
/// x^i_{t,f} = sum_q a^i_{q,f} s_{t-q,f} with tap 0 the direct path at the
/// frame's azimuth, plus the STFT of the noise. The planted filters equal the
/// ones `render` would use; without reverb the CTF is the direct path alone.
std::pair<Spectrogram, GroundTruth> render_ctf_model(const SceneSpec& spec);

/// Relative CTF vector of a planted filter set: channel 1 without its first
/// tap, then every other channel, all divided by a^1_0.
Eigen::VectorXcd relative_ctf(const std::vector<Eigen::MatrixXcd>& planted, int bin);

/// `header_json`, when non-empty, is stored verbatim under "header".
void export_ground_truth(const GroundTruth& gt, const std::filesystem::path& path, const std::string& header_json = {});
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Tap gains exp(-q hop / tau_rev), q >= 1, scaled so their energy sits
/// drr_db below the unit direct path. Index 0 is the direct path (1).
Eigen::VectorXd reverb_tap_gains(const ReverbSpec& reverb, double hop_s);

}  // namespace doatrack

#endif  // DOATRACK_SIMULATOR_HPP
