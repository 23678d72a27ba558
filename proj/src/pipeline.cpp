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

#include "doatrack/pipeline.hpp"

#include <algorithm>
#include <string>

#include "doatrack/error.hpp"

namespace doatrack {

CandidateGrid make_grid(const Config& config, const ArrayGeometry& geometry, double sample_rate, Eigen::Index fft_size) {
  const auto azimuths = default_azimuths(config.steering.directions);
  if (!config.steering.hrtf_table.empty()) {
    return load_hrtf_table(config.steering.hrtf_table, geometry.channel_count(), fft_size / 2 + 1, azimuths);
  }
  return CandidateGrid::from_geometry(geometry, azimuths, sample_rate, fft_size, config.steering.feature_magnitude);
}

namespace {

Config resolved(Config config, double sample_rate) {
  config.resolve(sample_rate);
  return config;
}

}  // namespace

Pipeline::Pipeline(const Config& config, const ArrayGeometry& geometry, double sample_rate, bool track)
    : config_(resolved(config, sample_rate)),
      channels_(geometry.channel_count()),
      analyzer_(sample_rate, config_.stft),
      grid_(make_grid(config_, geometry, sample_rate, analyzer_.fft_size())),
      estimator_(channels_, analyzer_.bin_count(), sample_rate, analyzer_.fft_size(), analyzer_.hop(), config_.dprtf,
                 config_.threads),
      localizer_(&grid_, config_.localizer),
      tracker_(config_.tracker),
      track_(track),
      pending_(Eigen::MatrixXd::Zero(analyzer_.window_length(), channels_)) {}

void Pipeline::push(const Eigen::Ref<const Eigen::MatrixXd>& chunk, const FrameSink& sink) {
  if (chunk.cols() != channels_) {
    throw InputError("audio has " + std::to_string(chunk.cols()) + " channels but the geometry has " +
                     std::to_string(channels_));
  }
  if (!chunk.allFinite()) throw InputError("audio contains non-finite samples");
  const Eigen::Index window = analyzer_.window_length();
  const Eigen::Index hop = analyzer_.hop();
  Eigen::Index offset = 0;
  while (offset < chunk.rows()) {
    const Eigen::Index take = std::min(chunk.rows() - offset, window - filled_);
    pending_.middleRows(filled_, take) = chunk.middleRows(offset, take);
    filled_ += take;
    offset += take;
    if (filled_ == window) {
      emit_frame(sink);
      // Keep the overlap for the next frame.
      pending_.topRows(window - hop) = pending_.bottomRows(window - hop).eval();
      filled_ = window - hop;
    }
  }
}

void Pipeline::process(const AudioBuffer& audio, const FrameSink& sink) {
  const Eigen::Index hop = analyzer_.hop();
  for (Eigen::Index s = 0; s < audio.length(); s += hop) {
    push(audio.samples.middleRows(s, std::min(hop, audio.length() - s)), sink);
  }
}

void Pipeline::emit_frame(const FrameSink& sink) {
  Eigen::MatrixXcd spectrum(analyzer_.bin_count(), channels_);
  for (int i = 0; i < channels_; ++i) spectrum.col(i) = analyzer_.transform(pending_.col(i));
  FeatureSet features = estimator_.process(spectrum);
  features.frame = frame_;
  const Eigen::VectorXd& weights = localizer_.update(features);

  FrameOutput out;
  out.frame = frame_;
  out.time_s = analyzer_.frame_time(frame_);
  out.features = &features;
  out.weights = &weights;
  out.peaks = localizer_.peaks();
  if (track_ && (frame_ + 1) % config_.frames_per_step == 0) {
    out.tracker = tracker_.step(make_observations(weights, grid_.azimuths()));
  }
  if (!weights.allFinite()) throw NumericalError("localizer weights became non-finite at frame " + std::to_string(frame_));
  if (sink) sink(out);
  ++frame_;
}

}  // namespace doatrack
