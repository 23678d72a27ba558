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

#ifndef DOATRACK_PIPELINE_HPP
#define DOATRACK_PIPELINE_HPP

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "doatrack/audio_io.hpp"
#include "doatrack/config.hpp"
#include "doatrack/dprtf.hpp"
#include "doatrack/localizer.hpp"
#include "doatrack/steering.hpp"
#include "doatrack/stft.hpp"
#include "doatrack/tracker.hpp"

namespace doatrack {

/// What the pipeline emits after every STFT frame. References are valid only
/// during the callback.
struct FrameOutput {
  Eigen::Index frame = 0;
  double time_s = 0.0;
  const FeatureSet* features = nullptr;
  const Eigen::VectorXd* weights = nullptr;
  std::vector<Peak> peaks;
  std::optional<TrackerFrame> tracker;  // set every frames_per_step frames
};

using FrameSink = std::function<void(const FrameOutput&)>;

/// Online localization and tracking. Audio may be pushed in chunks of any
/// size; only the samples of the frame under analysis are retained.
class Pipeline {
 public:
  Pipeline(const Config& config, const ArrayGeometry& geometry, double sample_rate, bool track = true);
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void push(const Eigen::Ref<const Eigen::MatrixXd>& chunk, const FrameSink& sink);

  /// Pushes the whole buffer in hop-sized chunks.
  void process(const AudioBuffer& audio, const FrameSink& sink);

  [[nodiscard]] const CandidateGrid& grid() const { return grid_; }
  [[nodiscard]] const DprtfEstimator& estimator() const { return estimator_; }
  [[nodiscard]] const Localizer& localizer() const { return localizer_; }
  [[nodiscard]] const Tracker& tracker() const { return tracker_; }
  [[nodiscard]] Eigen::Index frames_processed() const { return frame_; }
  [[nodiscard]] const FrameAnalyzer& analyzer() const { return analyzer_; }
  [[nodiscard]] double step_s() const { return config_.tracker.step_s; }

 private:
  void emit_frame(const FrameSink& sink);

  Config config_;
  int channels_;
  FrameAnalyzer analyzer_;
  CandidateGrid grid_;
  DprtfEstimator estimator_;
  Localizer localizer_;
  Tracker tracker_;
  bool track_;
  Eigen::MatrixXd pending_;  // (samples x channels), at most one window plus a chunk
  Eigen::Index filled_ = 0;
  Eigen::Index frame_ = 0;
};

/// Candidate grid for a configuration: HRTF table when configured, free-field otherwise.
CandidateGrid make_grid(const Config& config, const ArrayGeometry& geometry, double sample_rate, Eigen::Index fft_size);

}  // namespace doatrack

#endif  // DOATRACK_PIPELINE_HPP
