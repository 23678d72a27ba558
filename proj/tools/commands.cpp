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

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "doatrack/audio_io.hpp"
#include "doatrack/error.hpp"
#include "doatrack/io_util.hpp"
#include "doatrack/pipeline.hpp"
#include "doatrack/simulator.hpp"

namespace doatrack::cli {

using nlohmann::json;

namespace {

json geometry_json(const ArrayGeometry& g) {
  json mics = json::array();
  for (const auto& m : g.mics) mics.push_back({m.x(), m.y(), m.z()});
  return {{"mics", mics}, {"speed_of_sound", g.speed_of_sound}};
}

json make_header(const std::string& kind, const json& config, const json& extra = json::object()) {
  json h = {{"tool", "doatrack"}, {"version", DOATRACK_VERSION}, {"kind", kind}, {"config", config}};
  for (const auto& [k, v] : extra.items()) h[k] = v;
  return h;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError(dir.string() + ": cannot create directory: " + ec.message());
}

struct Loaded {
  AudioBuffer audio;
  ArrayGeometry geometry;
  Config config;
};

Loaded load_inputs(const AnalysisOptions& o) {
  Loaded l{read_wav(o.wav), load_geometry(o.geometry), o.config};
  if (l.audio.channel_count() != l.geometry.channel_count()) {
    throw InputError(o.wav.string() + ": has " + std::to_string(l.audio.channel_count()) + " channels but " +
                     o.geometry.string() + " lists " + std::to_string(l.geometry.channel_count()) + " microphones");
  }
  l.config.resolve(l.audio.sample_rate);
  return l;
}

void write_timing(const fs::path& path, const json& header, double wall_s, double duration_s) {
  json j = {{"header", header},
            {"wall_time_s", wall_s},
            {"signal_duration_s", duration_s},
            {"realtime_factor", realtime_factor(wall_s, duration_s)}};
  write_file_atomically(path, j.dump(2) + "\n");
}

class FeatureDump {
 public:
  explicit FeatureDump(const fs::path& path) : path_(path) {
    if (path.empty()) return;
    const auto ext = path.extension().string();
    if (ext == ".csv") {
      csv_ = true;
      os_ << "frame,t_seconds,bin,channel,re,im\n";
    } else if (ext != ".jsonl") {
      throw UsageError("--features-out must end in .csv or .jsonl, got '" + path.string() + "'");
    }
  }

  void add(const FrameOutput& out) {
    if (path_.empty()) return;
    for (const auto& f : out.features->features) {
      if (csv_) {
        os_ << out.frame << ',' << fmt(out.time_s) << ',' << f.bin << ',' << f.channel << ',' << fmt(f.value.real()) << ','
            << fmt(f.value.imag()) << '\n';
      } else {
        os_ << json{{"frame", out.frame}, {"t_seconds", out.time_s}, {"bin", f.bin}, {"channel", f.channel},
                    {"re", f.value.real()}, {"im", f.value.imag()}}
                   .dump()
            << '\n';
      }
    }
  }

  void finish() {
    if (!path_.empty()) write_file_atomically(path_, os_.str());
  }

 private:
  fs::path path_;
  bool csv_ = false;
  std::ostringstream os_;
};

struct Heatmap {
  std::vector<double> azimuths;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> rows;
};

Heatmap read_heatmap_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  Heatmap h;
  std::string line;
  bool have_columns = false;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!have_columns) {
      if (cells.empty() || cells[0] != "t_seconds") throw InputError(where + ": expected a 't_seconds,...' column header");
      for (std::size_t c = 1; c < cells.size(); ++c) h.azimuths.push_back(std::stod(cells[c]));
      have_columns = true;
      continue;
    }
    if (cells.size() != h.azimuths.size() + 1) {
      throw InputError(where + ": expected " + std::to_string(h.azimuths.size() + 1) + " fields, found " +
                       std::to_string(cells.size()));
    }
    try {
      h.times.push_back(std::stod(cells[0]));
      Eigen::VectorXd row(static_cast<Eigen::Index>(h.azimuths.size()));
      for (std::size_t c = 1; c < cells.size(); ++c) row(static_cast<Eigen::Index>(c - 1)) = std::stod(cells[c]);
      h.rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw InputError(where + ": non-numeric field");
    }
  }
  if (!have_columns) throw InputError(path.string() + ": no column header");
  return h;
}

std::string pgm(const Heatmap& h, bool log_scale, const std::string& comment) {
  const std::size_t width = h.azimuths.size();
  const std::size_t height = h.rows.size();
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  const auto value = [&](double w) { return log_scale ? std::log10(std::max(w, 1e-12)) : w; };
  for (const auto& r : h.rows) {
    for (Eigen::Index d = 0; d < r.size(); ++d) {
      hi = std::max(hi, value(r(d)));
      lo = std::min(lo, value(r(d)));
    }
  }
  if (!log_scale) lo = 0.0;
  const double span = hi > lo ? hi - lo : 1.0;
  std::string out = "P5\n# " + comment + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (const auto& r : h.rows) {
    for (Eigen::Index d = 0; d < r.size(); ++d) {
      const double v = std::clamp((value(r(d)) - lo) / span, 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  }
  return out;
}

}  // namespace

void run_simulate(const fs::path& scene, const fs::path& out_dir) {
  const SceneSpec spec = load_scene(scene);
  auto [audio, truth] = render(spec);
  ensure_dir(out_dir);
  json scene_json = json::parse(read_file(scene));
  const json header = make_header("ground_truth", json::object(), {{"scene", scene_json}});
  write_wav(out_dir / "audio.wav", audio);
  export_ground_truth(truth, out_dir / "ground_truth.json", header.dump());
  save_geometry(out_dir / "geometry.json", spec.geometry);
}

void run_localize(const AnalysisOptions& o) {
  const Loaded in = load_inputs(o);
  ensure_dir(o.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline pipeline(in.config, in.geometry, in.audio.sample_rate, false);
  const auto& az = pipeline.grid().azimuths();
  const double period = static_cast<double>(pipeline.analyzer().hop()) / in.audio.sample_rate;
  const json config = to_json(in.config);

  std::ostringstream csv;
  std::ostringstream peaks;
  Heatmap heat;
  heat.azimuths = az;
  FeatureDump dump(o.features_out);
  pipeline.process(in.audio, [&](const FrameOutput& out) {
    csv << fmt(out.time_s);
    for (Eigen::Index d = 0; d < out.weights->size(); ++d) csv << ',' << fmt((*out.weights)(d));
    csv << '\n';
    json list = json::array();
    for (const auto& p : out.peaks) list.push_back({{"azimuth_deg", p.azimuth_deg}, {"weight", p.weight}});
    peaks << json{{"t_seconds", out.time_s}, {"frame", out.frame}, {"peaks", list}}.dump() << '\n';
    heat.times.push_back(out.time_s);
    heat.rows.push_back(*out.weights);
    dump.add(out);
  });
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const json frames = {{"start_s", pipeline.analyzer().frame_time(0)},
                       {"period_s", period},
                       {"count", pipeline.frames_processed()}};
  const json extra = {{"geometry", geometry_json(in.geometry)}, {"input", o.wav.filename().string()}, {"frames", frames}};
  const json peaks_header = make_header("peaks", config, extra);
  const json heat_header = make_header("heatmap", config, extra);

  std::string csv_text = "# " + heat_header.dump() + "\nt_seconds";
  for (const double a : az) csv_text += "," + fmt(a);
  csv_text += "\n" + csv.str();
  write_file_atomically(o.out_dir / "heatmap.csv", csv_text);
  write_file_atomically(o.out_dir / "heatmap.pgm", pgm(heat, false, heat_header.dump()));
  write_file_atomically(o.out_dir / "peaks.jsonl", json{{"header", peaks_header}}.dump() + "\n" + peaks.str());
  dump.finish();
  write_timing(o.out_dir / "timing.json", make_header("timing", config), wall, in.audio.duration());
}

void run_track(const AnalysisOptions& o) {
  const Loaded in = load_inputs(o);
  ensure_dir(o.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline pipeline(in.config, in.geometry, in.audio.sample_rate, true);
  const json config = to_json(in.config);
  std::ostringstream body;
  long steps = 0;
  double first_step = -1.0;
  FeatureDump dump(o.features_out);
  pipeline.process(in.audio, [&](const FrameOutput& out) {
    dump.add(out);
    if (!out.tracker) return;
    if (steps == 0) first_step = out.time_s;
    ++steps;
    for (const auto& tr : out.tracker->tracks) {
      json cov = json::array();
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cov.push_back(tr.state.cov(r, c));
      }
      body << json{{"t_seconds", out.time_s},
                   {"track_id", tr.id},
                   {"azimuth_deg", tr.azimuth_deg()},
                   {"angular_velocity_deg_s", tr.velocity_deg_s()},
                   {"active", tr.active},
                   {"covariance", cov}}
                  .dump()
           << '\n';
    }
  });
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (steps == 0) first_step = pipeline.analyzer().frame_time(in.config.frames_per_step - 1);
  const json frames = {{"start_s", first_step}, {"period_s", in.config.tracker.step_s}, {"count", steps}};
  const json header = make_header(
      "tracks", config, {{"geometry", geometry_json(in.geometry)}, {"input", o.wav.filename().string()}, {"frames", frames}});
  write_file_atomically(o.out_dir / "tracks.jsonl", json{{"header", header}}.dump() + "\n" + body.str());
  dump.finish();
  write_timing(o.out_dir / "timing.json", make_header("timing", config), wall, in.audio.duration());
}

MetricsReport run_evaluate(const EvaluateOptions& o) {
  const GroundTruth gt = load_ground_truth(o.ground_truth);
  std::istringstream in(read_file(o.input));
  std::string line;
  if (!std::getline(in, line)) throw InputError(o.input.string() + ": empty file");
  json header;
  try {
    header = json::parse(line).at("header");
  } catch (const json::exception&) {
    throw InputError(o.input.string() + ":1: expected a {\"header\": ...} line");
  }
  std::string kind;
  double start = 0.0;
  double period = 0.0;
  long count = 0;
  try {
    kind = header.at("kind").get<std::string>();
    start = header.at("frames").at("start_s").get<double>();
    period = header.at("frames").at("period_s").get<double>();
    count = header.at("frames").at("count").get<long>();
  } catch (const json::exception& e) {
    throw InputError(o.input.string() + ":1: header field missing: " + e.what());
  }
  if (kind != "tracks" && kind != "peaks") throw InputError(o.input.string() + ": header.kind must be tracks or peaks");
  if (!(period > 0.0)) throw InputError(o.input.string() + ": header.frames.period_s must be positive");

  std::vector<std::vector<Target>> detections(static_cast<std::size_t>(std::max(0L, count)));
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = o.input.string() + ":" + std::to_string(line_no);
    try {
      const json r = json::parse(line);
      const double t = r.at("t_seconds").get<double>();
      const long k = std::lround((t - start) / period);
      if (k < 0 || k >= count) throw InputError(where + ": t_seconds " + fmt(t) + " is off the frame grid");
      auto& dets = detections[static_cast<std::size_t>(k)];
      if (kind == "tracks") {
        if (r.at("active").get<bool>()) dets.push_back({r.at("azimuth_deg").get<double>(), r.at("track_id").get<int>()});
      } else {
        for (const auto& p : r.at("peaks")) dets.push_back({p.at("azimuth_deg").get<double>(), -1});
      }
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }

  const auto truths_at = [&](double t) {
    std::vector<Target> truths;
    const auto f = static_cast<std::size_t>(gt.frame_at(t));
    for (std::size_t s = 0; s < gt.sources.size(); ++s) {
      if (gt.sources[s].active[f]) truths.push_back({gt.sources[s].azimuth_deg[f], static_cast<int>(s)});
    }
    return truths;
  };

  std::vector<FrameScore> scores;
  for (long k = 0; k < count; ++k) {
    const double t = start + static_cast<double>(k) * period;
    if (t < o.start_s || gt.frame_count() == 0 || t > gt.frame_times.back() + period) continue;
    scores.push_back(greedy_match(detections[static_cast<std::size_t>(k)], truths_at(t), o.config.success_threshold_deg));
  }
  MetricsReport report = aggregate(scores);

  json j = {{"header", make_header("metrics", to_json(o.config), {{"input", o.input.filename().string()}})},
            {"md_rate", report.md_rate},
            {"fa_rate", report.fa_rate},
            {"mae", report.mae},
            {"id_switches", report.id_switches},
            {"truths", report.truths},
            {"matches", report.matches},
            {"misses", report.misses},
            {"false_alarms", report.false_alarms},
            {"frames_scored", scores.size()}};
  if (!o.timing.empty()) {
    try {
      report.realtime_factor = json::parse(read_file(o.timing)).at("realtime_factor").get<double>();
    } catch (const json::exception& e) {
      throw InputError(o.timing.string() + ": realtime_factor: " + e.what());
    }
    j["realtime_factor"] = report.realtime_factor;
  }

  if (!o.roc_out.empty()) {
    if (o.heatmap.empty()) throw UsageError("--roc-out needs --heatmap");
    const Heatmap h = read_heatmap_csv(o.heatmap);
    std::vector<Eigen::VectorXd> maps;
    std::vector<std::vector<Target>> truths;
    for (std::size_t f = 0; f < h.rows.size(); ++f) {
      if (h.times[f] < o.start_s) continue;
      maps.push_back(h.rows[f]);
      truths.push_back(truths_at(h.times[f]));
    }
    std::vector<double> thresholds;
    for (int i = 0; i <= 50; ++i) thresholds.push_back(0.01 * i);
    thresholds.push_back(1.01);
    const auto points = roc_sweep(maps, h.azimuths, truths, thresholds, o.config.localizer.min_separation_deg,
                                  o.config.success_threshold_deg);
    write_file_atomically(o.roc_out, roc_csv(points));
  }
  if (!o.out.empty()) write_file_atomically(o.out, j.dump(2) + "\n");
  return report;
}

void run_heatmap(const fs::path& csv, const fs::path& out, bool log_scale) {
  const Heatmap h = read_heatmap_csv(csv);
  std::string comment = "doatrack " DOATRACK_VERSION " heatmap of " + csv.filename().string();
  write_file_atomically(out, pgm(h, log_scale, comment));
}

}  // namespace doatrack::cli
