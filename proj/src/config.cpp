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

#include "doatrack/config.hpp"

#include <cmath>
#include <set>

#include "doatrack/error.hpp"
#include "doatrack/io_util.hpp"

namespace doatrack {

using nlohmann::json;

void Config::resolve(double sample_rate) {
  const auto hop = std::lround(stft.hop_ms * sample_rate / 1000.0);
  tracker.step_s = static_cast<double>(frames_per_step * hop) / sample_rate;
}

json to_json(const Config& c) {
  json j;
  j["stft"] = {{"window_ms", c.stft.window_ms}, {"hop_ms", c.stft.hop_ms}};
  j["dprtf"] = {{"ctf_length", c.dprtf.ctf_length},
                {"rho", c.dprtf.rho},
                {"beta", c.dprtf.beta},
                {"kappa", c.dprtf.kappa},
                {"min_window_s", c.dprtf.min_window_s},
                {"consistency_threshold", c.dprtf.consistency_threshold},
                {"band_low_hz", c.dprtf.band_low_hz},
                {"band_high_hz", c.dprtf.band_high_hz}};
  j["steering"] = {{"directions", c.steering.directions},
                   {"feature_magnitude", c.steering.feature_magnitude},
                   {"hrtf_table", c.steering.hrtf_table.string()}};
  j["localizer"] = {{"sigma2", c.localizer.sigma2},
                    {"eta", c.localizer.eta},
                    {"gamma", c.localizer.gamma},
                    {"eta_silent", c.localizer.eta_silent},
                    {"smoothing", c.localizer.smoothing},
                    {"peak_threshold", c.localizer.peak_threshold},
                    {"min_separation_deg", c.localizer.min_separation_deg}};
  const auto& t = c.tracker;
  j["tracker"] = {{"obs_var", t.obs_cov(0, 0)},
                  {"max_speakers", t.max_speakers},
                  {"frames_per_step", c.frames_per_step},
                  {"outlier_density", t.outlier_density},
                  {"iterations", t.iterations},
                  {"birth_window", t.birth_window},
                  {"birth_threshold", t.birth_threshold},
                  {"birth_prior_var", t.birth_prior_var},
                  {"birth_dynamics_var", t.birth_dynamics_var},
                  {"birth_score", t.birth_score == BirthScore::kGeometricMean ? "geometric_mean" : "clutter_posterior"},
                  {"activity_window", t.activity_window},
                  {"activity_threshold", t.activity_threshold},
                  {"prune_after_steps", t.prune_after_steps}};
  j["eval"] = {{"success_threshold_deg", c.success_threshold_deg}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InputError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InputError(where_ + "." + key + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  Reader section(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, where_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw InputError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw InputError("config: " + what);
}

}  // namespace

Config config_from_json(const json& j, const std::string& where) {
  Config c;
  Reader root(j, where);
  {
    auto r = root.section("stft");
    r.get("window_ms", c.stft.window_ms);
    r.get("hop_ms", c.stft.hop_ms);
    r.finish();
  }
  {
    auto r = root.section("dprtf");
    r.get("ctf_length", c.dprtf.ctf_length);
    r.get("rho", c.dprtf.rho);
    r.get("beta", c.dprtf.beta);
    r.get("kappa", c.dprtf.kappa);
    r.get("min_window_s", c.dprtf.min_window_s);
    r.get("consistency_threshold", c.dprtf.consistency_threshold);
    r.get("band_low_hz", c.dprtf.band_low_hz);
    r.get("band_high_hz", c.dprtf.band_high_hz);
    r.finish();
  }
  {
    auto r = root.section("steering");
    std::string hrtf;
    r.get("directions", c.steering.directions);
    r.get("feature_magnitude", c.steering.feature_magnitude);
    r.get("hrtf_table", hrtf);
    c.steering.hrtf_table = hrtf;
    r.finish();
  }
  {
    auto r = root.section("localizer");
    r.get("sigma2", c.localizer.sigma2);
    r.get("eta", c.localizer.eta);
    r.get("gamma", c.localizer.gamma);
    r.get("eta_silent", c.localizer.eta_silent);
    r.get("smoothing", c.localizer.smoothing);
    r.get("peak_threshold", c.localizer.peak_threshold);
    r.get("min_separation_deg", c.localizer.min_separation_deg);
    r.finish();
  }
  {
    auto r = root.section("tracker");
    auto& t = c.tracker;
    double obs_var = t.obs_cov(0, 0);
    std::string score = t.birth_score == BirthScore::kGeometricMean ? "geometric_mean" : "clutter_posterior";
    r.get("obs_var", obs_var);
    r.get("max_speakers", t.max_speakers);
    r.get("frames_per_step", c.frames_per_step);
    r.get("outlier_density", t.outlier_density);
    r.get("iterations", t.iterations);
    r.get("birth_window", t.birth_window);
    r.get("birth_threshold", t.birth_threshold);
    r.get("birth_prior_var", t.birth_prior_var);
    r.get("birth_dynamics_var", t.birth_dynamics_var);
    r.get("birth_score", score);
    r.get("activity_window", t.activity_window);
    r.get("activity_threshold", t.activity_threshold);
    r.get("prune_after_steps", t.prune_after_steps);
    r.finish();
    t.obs_cov = obs_var * Eigen::Matrix2d::Identity();
    if (score == "geometric_mean") {
      t.birth_score = BirthScore::kGeometricMean;
    } else if (score == "clutter_posterior") {
      t.birth_score = BirthScore::kClutterPosterior;
    } else {
      throw InputError(where + ".tracker.birth_score: expected geometric_mean|clutter_posterior, found '" + score + "'");
    }
  }
  {
    auto r = root.section("eval");
    r.get("success_threshold_deg", c.success_threshold_deg);
    r.finish();
  }
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  root.finish();

  check(c.stft.window_ms > 0 && c.stft.hop_ms > 0 && c.stft.hop_ms <= c.stft.window_ms, "stft: need 0 < hop_ms <= window_ms");
  check(c.dprtf.ctf_length >= 1, "dprtf.ctf_length must be >= 1");
  check(c.dprtf.rho > 0, "dprtf.rho must be positive");
  check(c.dprtf.beta >= 0 && c.dprtf.beta < 1, "dprtf.beta must be in [0, 1)");
  check(c.dprtf.kappa > 0 && c.dprtf.min_window_s > 0, "dprtf.kappa and dprtf.min_window_s must be positive");
  check(c.steering.directions >= 2, "steering.directions must be >= 2");
  check(c.localizer.sigma2 > 0 && c.localizer.eta > 0 && c.localizer.eta_silent >= 0, "localizer: sigma2 and eta must be positive");
  check(c.localizer.smoothing >= 0 && c.localizer.smoothing < 0.5, "localizer.smoothing must be in [0, 0.5)");
  check(c.tracker.obs_cov(0, 0) > 0, "tracker.obs_var must be positive");
  check(c.tracker.max_speakers >= 0 && c.tracker.iterations >= 1, "tracker: max_speakers >= 0 and iterations >= 1");
  check(c.frames_per_step >= 1, "tracker.frames_per_step must be >= 1");
  check(c.tracker.birth_window >= 1 && c.tracker.activity_window >= 1, "tracker: windows must be >= 1");
  check(c.tracker.outlier_density > 0, "tracker.outlier_density must be positive");
  check(c.threads >= 1, "threads must be >= 1");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j, path.string());
}

Config apply_overrides(const Config& config, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j = to_json(config);
  for (const auto& [path, text] : overrides) {
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) throw UsageError("unknown config key '" + path + "'");
      node = &(*node)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (node->is_object()) throw UsageError("config key '" + path + "' names a section, not a value");
    *node = value;
  }
  return config_from_json(j, "config");
}

}  // namespace doatrack
