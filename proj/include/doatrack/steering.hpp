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

#ifndef DOATRACK_STEERING_HPP
#define DOATRACK_STEERING_HPP

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "doatrack/stft.hpp"

namespace doatrack {

struct ArrayGeometry {
  std::vector<Eigen::Vector3d> mics;
  double speed_of_sound = 343.0;

  [[nodiscard]] int channel_count() const { return static_cast<int>(mics.size()); }
};

/// Throws InputError unless there are >= 2 distinct positions and c > 0.
void validate(const ArrayGeometry& geometry);

/// Far-field planar direction (cos az, sin az, 0).
Eigen::Vector3d direction_vector(double azimuth_deg);

/// Delay of each channel relative to channel 1, tau_i = (m_1 - m_i) . u / c.
/// Positive when channel i receives the wavefront later.
Eigen::VectorXd tdoa(const ArrayGeometry& geometry, double azimuth_deg);

/// Normalized predicted DP-RTF of channel i (1-based) at `freq_hz`:
/// magnitude * exp(-j 2 pi f (tau_i - tau_1)), mapped by c / sqrt(1 + |c|^2).
Complex predicted_feature(const ArrayGeometry& geometry, double azimuth_deg, double freq_hz, int channel,
                          double magnitude = 0.5);

/// D equally spaced azimuths over (-180, 180], ending at 180.
std::vector<double> default_azimuths(int count);

/// Candidate directions and their predicted features.
class CandidateGrid {
 public:
  CandidateGrid() = default;
  /// `predicted[i - 2]` is a (bins x D) matrix of already-normalized features.
  CandidateGrid(std::vector<double> azimuths_deg, std::vector<Eigen::MatrixXcd> predicted);

  /// Free-field grid from array geometry.
  static CandidateGrid from_geometry(const ArrayGeometry& geometry, std::vector<double> azimuths_deg,
                                     double sample_rate, Eigen::Index fft_size, double magnitude = 0.5);

  [[nodiscard]] int size() const { return static_cast<int>(azimuths_.size()); }
  [[nodiscard]] int channel_count() const { return static_cast<int>(predicted_.size()) + 1; }
  [[nodiscard]] Eigen::Index bin_count() const { return predicted_.empty() ? 0 : predicted_.front().rows(); }
  [[nodiscard]] const std::vector<double>& azimuths() const { return azimuths_; }
  [[nodiscard]] double azimuth(int d) const { return azimuths_[static_cast<std::size_t>(d)]; }
  /// Row of D predicted features for (bin, channel), channel 1-based >= 2.
  [[nodiscard]] auto predicted(int bin, int channel) const {
    return predicted_[static_cast<std::size_t>(channel - 2)].row(bin);
  }
  [[nodiscard]] Complex at(int bin, int channel, int d) const {
    return predicted_[static_cast<std::size_t>(channel - 2)](bin, d);
  }

 private:
  std::vector<double> azimuths_;
  std::vector<Eigen::MatrixXcd> predicted_;
};

/// Geometry JSON: {"mics": [[x, y, z], ...], "speed_of_sound": 343}.
ArrayGeometry load_geometry(const std::filesystem::path& path);
void save_geometry(const std::filesystem::path& path, const ArrayGeometry& geometry);

/// HRTF-ratio table JSON:
///   {"format": "doatrack-hrtf-1", "sample_rate": fs, "fft_size": N,
///    "channels": I, "azimuths_deg": [D values],
///    "ratios": [I-1][F][D] of [re, im]}
/// Ratios are raw (channel i over channel 1); normalization is applied on load.
/// Throws InputError naming expected/found dimensions on mismatch.
CandidateGrid load_hrtf_table(const std::filesystem::path& path, int channels, Eigen::Index bins,
                              const std::vector<double>& azimuths_deg);

}  // namespace doatrack

#endif  // DOATRACK_STEERING_HPP
