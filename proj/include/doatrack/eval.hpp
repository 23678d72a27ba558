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

#ifndef DOATRACK_EVAL_HPP
#define DOATRACK_EVAL_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace doatrack {

/// Detected or true azimuth with an identity (-1 when none).
struct Target {
  double azimuth_deg = 0.0;
  int id = -1;
};

struct MatchedPair {
  int detection = 0;  // index into the detections
  int truth = 0;      // index into the truths
  int detection_id = -1;
  int truth_id = -1;
  double detected_deg = 0.0;
  double true_deg = 0.0;
  double error_deg = 0.0;
};

struct FrameScore {
  std::vector<MatchedPair> matches;  // successful pairs only
  int misses = 0;
  int false_alarms = 0;
  int truths = 0;
  int detections = 0;
};

struct MetricsReport {
  double md_rate = 0.0;  // percent of truths
  double fa_rate = 0.0;  // percent of truths
  double mae = 0.0;      // degrees, over successful matches
  int id_switches = 0;
  long truths = 0;
  long matches = 0;
  long misses = 0;
  long false_alarms = 0;
  double realtime_factor = 0.0;  // 0 when not measured
};

/// Repeatedly pairs the globally closest remaining detection and truth
/// (wrap-aware); ties go to the lower detection index, then the lower truth
/// index. Pairs further apart than the threshold count as one miss and one
/// false alarm.
FrameScore greedy_match(std::span<const Target> detections, std::span<const Target> truths,
                        double success_threshold_deg = 15.0);

/// Rates over all frames; identity switches counted over matched frames only.
MetricsReport aggregate(std::span<const FrameScore> frames);

struct RocPoint {
  double threshold = 0.0;
  double fa_rate = 0.0;
  double md_rate = 0.0;
};

/// One point per threshold: peaks of every heatmap are scored against the
/// truths of the same frame.
std::vector<RocPoint> roc_sweep(std::span<const Eigen::VectorXd> heatmaps, const std::vector<double>& azimuths_deg,
                                std::span<const std::vector<Target>> truths, std::span<const double> thresholds,
                                double min_separation_deg = 15.0, double success_threshold_deg = 15.0);

double realtime_factor(double wall_time_s, double signal_duration_s);

std::string metrics_table(const MetricsReport& report);
std::string roc_csv(std::span<const RocPoint> points);

}  // namespace doatrack

#endif  // DOATRACK_EVAL_HPP
