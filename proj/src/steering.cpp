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

#include "doatrack/steering.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <json.hpp>

#include "doatrack/dprtf.hpp"
#include "doatrack/error.hpp"
#include "doatrack/io_util.hpp"

namespace doatrack {

using nlohmann::json;

void validate(const ArrayGeometry& geometry) {
  if (geometry.mics.size() < 2) throw InputError("array geometry needs at least 2 microphones");
  if (!(geometry.speed_of_sound > 0.0)) throw InputError("speed_of_sound must be positive");
  for (const auto& m : geometry.mics) {
    if (!m.allFinite()) throw InputError("microphone position is not finite");
  }
  for (std::size_t i = 0; i < geometry.mics.size(); ++i) {
    for (std::size_t j = i + 1; j < geometry.mics.size(); ++j) {
      if ((geometry.mics[i] - geometry.mics[j]).norm() > 0.0) return;
    }
  }
  throw InputError("array geometry has no two distinct microphone positions");
}

Eigen::Vector3d direction_vector(double azimuth_deg) {
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  return {std::cos(a), std::sin(a), 0.0};
}

Eigen::VectorXd tdoa(const ArrayGeometry& geometry, double azimuth_deg) {
  const Eigen::Vector3d u = direction_vector(azimuth_deg);
  Eigen::VectorXd tau(geometry.channel_count());
  for (int i = 0; i < geometry.channel_count(); ++i) {
    tau(i) = (geometry.mics[0] - geometry.mics[static_cast<std::size_t>(i)]).dot(u) / geometry.speed_of_sound;
  }
  return tau;
}

Complex predicted_feature(const ArrayGeometry& geometry, double azimuth_deg, double freq_hz, int channel,
                          double magnitude) {
  const Eigen::VectorXd tau = tdoa(geometry, azimuth_deg);
  const double phase = -2.0 * std::numbers::pi * freq_hz * (tau(channel - 1) - tau(0));
  return normalize_feature(std::polar(magnitude, phase));
}

std::vector<double> default_azimuths(int count) {
  std::vector<double> az(static_cast<std::size_t>(count));
  const double spacing = 360.0 / count;
  for (int d = 0; d < count; ++d) az[static_cast<std::size_t>(d)] = -180.0 + spacing * (d + 1);
  return az;
}

CandidateGrid::CandidateGrid(std::vector<double> azimuths_deg, std::vector<Eigen::MatrixXcd> predicted)
    : azimuths_(std::move(azimuths_deg)), predicted_(std::move(predicted)) {
  if (azimuths_.size() < 2) throw InputError("candidate grid needs at least 2 directions");
  for (std::size_t d = 1; d < azimuths_.size(); ++d) {
    if (!(azimuths_[d] > azimuths_[d - 1])) throw InputError("grid azimuths must be strictly increasing");
  }
  if (!(azimuths_.front() > -180.0) || azimuths_.back() > 180.0) {
    throw InputError("grid azimuths must lie in (-180, 180]");
  }
  for (const auto& p : predicted_) {
    if (p.cols() != static_cast<Eigen::Index>(azimuths_.size())) throw InputError("predicted table width != D");
  }
}

CandidateGrid CandidateGrid::from_geometry(const ArrayGeometry& geometry, std::vector<double> azimuths_deg,
                                           double sample_rate, Eigen::Index fft_size, double magnitude) {
  validate(geometry);
  const Eigen::Index bins = fft_size / 2 + 1;
  const auto D = static_cast<Eigen::Index>(azimuths_deg.size());
  std::vector<Eigen::MatrixXcd> predicted(static_cast<std::size_t>(geometry.channel_count() - 1),
                                          Eigen::MatrixXcd(bins, D));
  for (Eigen::Index d = 0; d < D; ++d) {
    const Eigen::VectorXd tau = tdoa(geometry, azimuths_deg[static_cast<std::size_t>(d)]);
    for (int i = 2; i <= geometry.channel_count(); ++i) {
      for (Eigen::Index k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
        const double phase = -2.0 * std::numbers::pi * f * (tau(i - 1) - tau(0));
        predicted[static_cast<std::size_t>(i - 2)](k, d) = normalize_feature(std::polar(magnitude, phase));
      }
    }
  }
  return CandidateGrid(std::move(azimuths_deg), std::move(predicted));
}

ArrayGeometry load_geometry(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  ArrayGeometry g;
  try {
    for (const auto& m : j.at("mics")) {
      if (m.size() != 3) throw InputError(path.string() + ": field 'mics' entries must have 3 coordinates");
      g.mics.emplace_back(m[0].get<double>(), m[1].get<double>(), m[2].get<double>());
    }
    if (j.contains("speed_of_sound")) g.speed_of_sound = j["speed_of_sound"].get<double>();
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": field 'mics' or 'speed_of_sound': " + e.what());
  }
  validate(g);
  return g;
}

void save_geometry(const std::filesystem::path& path, const ArrayGeometry& geometry) {
  json j;
  j["mics"] = json::array();
  for (const auto& m : geometry.mics) j["mics"].push_back({m.x(), m.y(), m.z()});
  j["speed_of_sound"] = geometry.speed_of_sound;
  write_file_atomically(path, j.dump(2) + "\n");
}

CandidateGrid load_hrtf_table(const std::filesystem::path& path, int channels, Eigen::Index bins,
                              const std::vector<double>& azimuths_deg) {
  const std::string where = path.string() + ": ";
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(where + "invalid JSON: " + e.what());
  }
  try {
    const auto found_channels = j.at("channels").get<int>();
    const auto az = j.at("azimuths_deg").get<std::vector<double>>();
    const auto& ratios = j.at("ratios");
    const auto D = static_cast<Eigen::Index>(azimuths_deg.size());
    const auto mismatch = [&](const std::string& what, long expected, long found) {
      throw InputError(where + "grid mismatch in " + what + ": expected " + std::to_string(expected) +
                       ", found " + std::to_string(found));
    };
    if (found_channels != channels) mismatch("channels (I)", channels, found_channels);
    if (static_cast<Eigen::Index>(az.size()) != D) mismatch("azimuths (D)", D, static_cast<long>(az.size()));
    for (std::size_t d = 0; d < az.size(); ++d) {
      if (std::abs(az[d] - azimuths_deg[d]) > 1e-6) {
        throw InputError(where + "grid mismatch: azimuth " + std::to_string(d) + " is " + std::to_string(az[d]) +
                         ", expected " + std::to_string(azimuths_deg[d]));
      }
    }
    if (static_cast<int>(ratios.size()) != channels - 1) {
      mismatch("ratios channel axis (I-1)", channels - 1, static_cast<long>(ratios.size()));
    }
    std::vector<Eigen::MatrixXcd> predicted;
    for (const auto& per_channel : ratios) {
      if (static_cast<Eigen::Index>(per_channel.size()) != bins) {
        mismatch("ratios frequency axis (F)", bins, static_cast<long>(per_channel.size()));
      }
      Eigen::MatrixXcd table(bins, D);
      for (Eigen::Index k = 0; k < bins; ++k) {
        const auto& row = per_channel[static_cast<std::size_t>(k)];
        if (static_cast<Eigen::Index>(row.size()) != D) mismatch("ratios direction axis (D)", D, static_cast<long>(row.size()));
        for (Eigen::Index d = 0; d < D; ++d) {
          const auto& v = row[static_cast<std::size_t>(d)];
          table(k, d) = normalize_feature(Complex(v.at(0).get<double>(), v.at(1).get<double>()));
        }
      }
      predicted.push_back(std::move(table));
    }
    return CandidateGrid(azimuths_deg, std::move(predicted));
  } catch (const json::exception& e) {
    throw InputError(where + e.what());
  }
}

}  // namespace doatrack
