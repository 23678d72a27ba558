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

#include "doatrack/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "doatrack/localizer.hpp"

namespace doatrack {

FrameScore greedy_match(std::span<const Target> detections, std::span<const Target> truths,
                        double success_threshold_deg) {
  FrameScore score;
  score.detections = static_cast<int>(detections.size());
  score.truths = static_cast<int>(truths.size());
  std::vector<bool> det_used(detections.size(), false);
  std::vector<bool> truth_used(truths.size(), false);
  const std::size_t rounds = std::min(detections.size(), truths.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bd = 0;
    std::size_t bt = 0;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      if (det_used[d]) continue;
      for (std::size_t t = 0; t < truths.size(); ++t) {
        if (truth_used[t]) continue;
        const double diff = circular_distance_deg(detections[d].azimuth_deg, truths[t].azimuth_deg);
        if (diff < best) {
          best = diff;
          bd = d;
          bt = t;
        }
      }
    }
    det_used[bd] = true;
    truth_used[bt] = true;
    if (best <= success_threshold_deg) {
      score.matches.push_back({static_cast<int>(bd), static_cast<int>(bt), detections[bd].id, truths[bt].id,
                               detections[bd].azimuth_deg, truths[bt].azimuth_deg, best});
    }
  }
  const auto matched = static_cast<int>(score.matches.size());
  score.misses = score.truths - matched;
  score.false_alarms = score.detections - matched;
  return score;
}

MetricsReport aggregate(std::span<const FrameScore> frames) {
  MetricsReport r;
  double error_sum = 0.0;
  std::map<int, int> last_id;  // truth id -> detection id
  for (const auto& f : frames) {
    r.truths += f.truths;
    r.misses += f.misses;
    r.false_alarms += f.false_alarms;
    r.matches += static_cast<long>(f.matches.size());
    for (const auto& m : f.matches) {
      error_sum += m.error_deg;
      if (m.truth_id < 0 || m.detection_id < 0) continue;
      const auto it = last_id.find(m.truth_id);
      if (it != last_id.end() && it->second != m.detection_id) ++r.id_switches;
      last_id[m.truth_id] = m.detection_id;
    }
  }
  if (r.truths > 0) {
    r.md_rate = 100.0 * static_cast<double>(r.misses) / static_cast<double>(r.truths);
    r.fa_rate = 100.0 * static_cast<double>(r.false_alarms) / static_cast<double>(r.truths);
  }
  if (r.matches > 0) r.mae = error_sum / static_cast<double>(r.matches);
  return r;
}

std::vector<RocPoint> roc_sweep(std::span<const Eigen::VectorXd> heatmaps, const std::vector<double>& azimuths_deg,
                                std::span<const std::vector<Target>> truths, std::span<const double> thresholds,
                                double min_separation_deg, double success_threshold_deg) {
  std::vector<RocPoint> out;
  const std::size_t frames = std::min(heatmaps.size(), truths.size());
  for (const double thr : thresholds) {
    std::vector<FrameScore> scores;
    scores.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      std::vector<Target> dets;
      for (const auto& p : peak_select(heatmaps[t], azimuths_deg, thr, min_separation_deg)) dets.push_back({p.azimuth_deg, -1});
      scores.push_back(greedy_match(dets, truths[t], success_threshold_deg));
    }
    const MetricsReport r = aggregate(scores);
    // Without any truth the rates are undefined; report the empty-output corner.
    const bool any_truth = r.truths > 0;
    out.push_back({thr, any_truth ? r.fa_rate : 0.0, any_truth ? r.md_rate : 100.0});
  }
  return out;
}

double realtime_factor(double wall_time_s, double signal_duration_s) {
  return signal_duration_s > 0.0 ? wall_time_s / signal_duration_s : 0.0;
}

std::string metrics_table(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "metric           value\n"
                "md_rate (%%)      %.2f\n"
                "fa_rate (%%)      %.2f\n"
                "mae (deg)        %.2f\n"
                "id_switches      %d\n"
                "truths           %ld\n"
                "matches          %ld\n"
                "realtime_factor  %.3f\n",
                r.md_rate, r.fa_rate, r.mae, r.id_switches, r.truths, r.matches, r.realtime_factor);
  return buf;
}

std::string roc_csv(std::span<const RocPoint> points) {
  std::ostringstream os;
  os.precision(10);
  os << "threshold,fa_rate,md_rate\n";
  for (const auto& p : points) os << p.threshold << ',' << p.fa_rate << ',' << p.md_rate << '\n';
  return os.str();
}

}  // namespace doatrack
