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

#include "doatrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include <json.hpp>

#include "doatrack/error.hpp"
#include "doatrack/io_util.hpp"

namespace doatrack {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSincHalfTaps = 16;       // 32-tap interpolator
constexpr double kBaseDelay = 24.0;     // samples added to every channel
constexpr double kGateRamp_s = 0.005;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd gaussian_noise(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = normal(rng);
  return x;
}

Eigen::VectorXd looped_wav_channel(const std::filesystem::path& path, Eigen::Index n, double fs, Eigen::Index channel) {
  const AudioBuffer wav = read_wav(path);
  if (std::abs(wav.sample_rate - fs) > 0.5) {
    throw InputError(path.string() + ": sample rate " + std::to_string(wav.sample_rate) + " does not match scene rate " +
                     std::to_string(fs) + " (resampling is not supported)");
  }
  if (wav.length() == 0) throw InputError(path.string() + ": no samples");
  if (channel >= wav.channel_count()) {
    throw InputError(path.string() + ": needs at least " + std::to_string(channel + 1) + " channels");
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = wav.samples(i % wav.length(), channel);
  return x;
}

Eigen::VectorXd harmonic_excitation(double f0, Eigen::Index n, double fs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  // Syllabic gating: voiced runs of 120-300 ms separated by 40-120 ms gaps.
  Eigen::VectorXd envelope = Eigen::VectorXd::Zero(n);
  const auto ramp = static_cast<Eigen::Index>(0.01 * fs);
  double t = uni(rng) * 0.1;
  while (t * fs < static_cast<double>(n)) {
    const double len = 0.12 + 0.18 * uni(rng);
    const auto a = static_cast<Eigen::Index>(t * fs);
    const auto b = std::min<Eigen::Index>(n, static_cast<Eigen::Index>((t + len) * fs));
    for (Eigen::Index i = a; i < b; ++i) {
      const Eigen::Index edge = std::min(i - a, b - 1 - i);
      envelope(i) = edge >= ramp ? 1.0 : 0.5 - 0.5 * std::cos(kPi * static_cast<double>(edge) / static_cast<double>(ramp));
    }
    t += len + 0.04 + 0.08 * uni(rng);
  }
  const double vib_phase = 2.0 * kPi * uni(rng);
  const double vib_rate = 0.3 + 0.4 * uni(rng);
  const int harmonics = std::max(1, static_cast<int>(0.45 * fs / (1.1 * f0)));
  std::vector<double> phase_offsets(static_cast<std::size_t>(harmonics));
  for (auto& p : phase_offsets) p = 2.0 * kPi * uni(rng);
  Eigen::VectorXd x(n);
  double phase = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = static_cast<double>(i) / fs;
    const double f = f0 * (1.0 + 0.06 * std::sin(2.0 * kPi * vib_rate * ti + vib_phase));
    phase += 2.0 * kPi * f / fs;
    double v = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      if (k * f > 0.48 * fs) break;
      v += std::sin(k * phase + phase_offsets[static_cast<std::size_t>(k - 1)]) / k;
    }
    x(i) = v;
  }
  x = x.cwiseProduct(envelope) + 0.03 * gaussian_noise(n, rng).cwiseProduct(envelope);
  return x;
}

Eigen::VectorXd make_excitation(const Excitation& ex, Eigen::Index n, double fs, std::mt19937_64& rng) {
  Eigen::VectorXd x;
  switch (ex.type) {
    case ExcitationType::kWhite:
      x = gaussian_noise(n, rng);
      break;
    case ExcitationType::kSpeechShaped: {
      x = gaussian_noise(n, rng);
      const double a = std::exp(-2.0 * kPi * 500.0 / fs);
      double y = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) x(i) = y = a * y + (1.0 - a) * x(i);
      break;
    }
    case ExcitationType::kHarmonic:
      x = harmonic_excitation(ex.f0_hz, n, fs, rng);
      break;
    case ExcitationType::kWav:
      x = looped_wav_channel(ex.path, n, fs, 0);
      break;
  }
  const double rms = std::sqrt(x.squaredNorm() / std::max<double>(1.0, static_cast<double>(n)));
  if (rms > 0.0) x /= rms;
  return x;
}

Eigen::VectorXd activity_gate(const SourceSpec& src, Eigen::Index n, double fs) {
  Eigen::VectorXd gate = Eigen::VectorXd::Zero(n);
  const double ramp = kGateRamp_s * fs;
  for (const auto& [start, end] : src.activity) {
    const auto a = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(start * fs)));
    const auto b = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::floor(end * fs)));
    for (Eigen::Index i = a; i < b; ++i) {
      const double edge = static_cast<double>(std::min(i - a, b - 1 - i));
      const double g = edge >= ramp ? 1.0 : 0.5 - 0.5 * std::cos(kPi * edge / ramp);
      gate(i) = std::max(gate(i), g);
    }
  }
  return gate;
}

/// Absolute delay in samples of every channel for a far-field source.
Eigen::VectorXd channel_delays(const ArrayGeometry& geom, double azimuth_deg, double fs) {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  for (const auto& m : geom.mics) center += m;
  center /= static_cast<double>(geom.mics.size());
  const Eigen::Vector3d u = direction_vector(azimuth_deg);
  Eigen::VectorXd d(geom.channel_count());
  for (int i = 0; i < geom.channel_count(); ++i) {
    d(i) = kBaseDelay + (center - geom.mics[static_cast<std::size_t>(i)]).dot(u) / geom.speed_of_sound * fs;
  }
  return d;
}

double blackman(double x) {
  const double r = x / kSincHalfTaps;
  if (std::abs(r) >= 1.0) return 0.0;
  return 0.42 + 0.5 * std::cos(kPi * r) + 0.08 * std::cos(2.0 * kPi * r);
}

/// Time-varying fractional delay of `src` for every channel, delays taken at
/// hop-spaced control points and interpolated linearly per sample.
Eigen::MatrixXd render_direct_path(const Eigen::VectorXd& src, const SourceSpec& spec, const ArrayGeometry& geom,
                                   double fs, Eigen::Index hop) {
  const Eigen::Index n = src.size();
  const int I = geom.channel_count();
  const Eigen::Index controls = n / hop + 2;
  Eigen::MatrixXd delays(controls, I);
  for (Eigen::Index c = 0; c < controls; ++c) {
    delays.row(c) = channel_delays(geom, spec.azimuth_at(static_cast<double>(c * hop) / fs), fs).transpose();
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, I);
  for (int i = 0; i < I; ++i) {
    for (Eigen::Index s = 0; s < n; ++s) {
      const Eigen::Index c = s / hop;
      const double frac_c = static_cast<double>(s - c * hop) / static_cast<double>(hop);
      const double delay = (1.0 - frac_c) * delays(c, i) + frac_c * delays(c + 1, i);
      const double pos = static_cast<double>(s) - delay;
      const auto base = static_cast<Eigen::Index>(std::floor(pos));
      const double frac = pos - static_cast<double>(base);
      const double sin_frac = std::sin(kPi * frac);
      double acc = 0.0;
      for (int k = -kSincHalfTaps + 1; k <= kSincHalfTaps; ++k) {
        const Eigen::Index m = base + k;
        if (m < 0 || m >= n) continue;
        const double x = frac - k;  // distance from tap m to the read position
        double h;
        if (std::abs(x) < 1e-12) {
          h = 1.0;
        } else {
          // sin(pi (frac - k)) = (-1)^k sin(pi frac)
          h = ((k & 1) ? -sin_frac : sin_frac) / (kPi * x);
        }
        acc += src(m) * h * blackman(x);
      }
      out(s, i) = acc;
    }
  }
  return out;
}

/// Single-channel STFT with the given analyzer, (bins x frames).
Eigen::MatrixXcd stft_mono(FrameAnalyzer& analyzer, const Eigen::VectorXd& x) {
  const Eigen::Index frames = analyzer.frame_count(x.size());
  Eigen::MatrixXcd out(analyzer.bin_count(), frames);
  for (Eigen::Index t = 0; t < frames; ++t) out.col(t) = analyzer.transform(x.segment(t * analyzer.hop(), analyzer.window_length()));
  return out;
}

/// Weighted overlap-add inverse of stft_mono.
Eigen::VectorXd istft_mono(const FrameAnalyzer& analyzer, const Eigen::MatrixXcd& spec, Eigen::Index n) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  const Eigen::Index N = analyzer.window_length();
  const Eigen::VectorXd& w = analyzer.window();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(n);
  std::vector<std::complex<double>> freq(static_cast<std::size_t>(spec.rows()));
  std::vector<double> time;
  for (Eigen::Index t = 0; t < spec.cols(); ++t) {
    for (Eigen::Index k = 0; k < spec.rows(); ++k) freq[static_cast<std::size_t>(k)] = spec(k, t);
    fft.inv(time, freq, analyzer.fft_size());
    const Eigen::Index start = t * analyzer.hop();
    for (Eigen::Index i = 0; i < N && start + i < n; ++i) {
      out(start + i) += w(i) * time[static_cast<std::size_t>(i)];
      norm(start + i) += w(i) * w(i);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norm(i) > 1e-8) out(i) /= norm(i);
  }
  return out;
}

/// Random reverberant taps (bins x taps) of one channel; tap 0 left zero.
Eigen::MatrixXcd random_tail(const ReverbSpec& reverb, double hop_s, Eigen::Index bins, std::mt19937_64& rng) {
  const Eigen::VectorXd gains = reverb_tap_gains(reverb, hop_s);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd taps = Eigen::MatrixXcd::Zero(bins, reverb.taps);
  for (Eigen::Index k = 0; k < bins; ++k) {
    for (int q = 1; q < reverb.taps; ++q) {
      const double re = normal(rng);
      const double im = normal(rng);
      taps(k, q) = gains(q) * Complex(re, im);
    }
  }
  return taps;
}

void fill_direct_tap(Eigen::MatrixXcd& taps, const Eigen::VectorXd& delays, int channel, Eigen::Index fft_size) {
  for (Eigen::Index k = 0; k < taps.rows(); ++k) {
    taps(k, 0) = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) * delays(channel) / static_cast<double>(fft_size));
  }
}

GroundTruth make_truth(const SceneSpec& spec, const FrameAnalyzer& analyzer, Eigen::Index samples) {
  GroundTruth gt;
  gt.sample_rate = spec.sample_rate;
  gt.window_length = analyzer.window_length();
  gt.hop = analyzer.hop();
  gt.fft_size = analyzer.fft_size();
  const Eigen::Index frames = analyzer.frame_count(samples);
  for (Eigen::Index t = 0; t < frames; ++t) gt.frame_times.push_back(analyzer.frame_time(t));
  for (const auto& src : spec.sources) {
    SourceTruth st;
    for (const double t : gt.frame_times) {
      st.azimuth_deg.push_back(src.azimuth_at(t));
      st.active.push_back(src.active_at(t));
    }
    gt.sources.push_back(std::move(st));
  }
  return gt;
}

void validate_scene(const SceneSpec& spec) {
  validate(spec.geometry);
  if (!(spec.duration_s > 0.0)) throw InputError("scene duration_s must be positive");
  if (!(spec.sample_rate > 0.0)) throw InputError("scene sample_rate must be positive");
  if (spec.reverb.enabled && (spec.reverb.taps < 1 || !(spec.reverb.decay_s > 0.0))) {
    throw InputError("reverb needs taps >= 1 and decay_s > 0");
  }
  for (const auto& src : spec.sources) {
    if (src.trajectory.empty()) throw InputError("every source needs a trajectory");
    for (const auto& [t, az] : src.trajectory) {
      if (!(az > -180.0 && az <= 180.0)) throw InputError("trajectory azimuth " + std::to_string(az) + " outside (-180, 180]");
    }
    for (const auto& [a, b] : src.activity) {
      if (a < 0.0 || b > spec.duration_s + 1e-9 || b < a) {
        throw InputError("activity interval [" + std::to_string(a) + ", " + std::to_string(b) + "] outside the scene");
      }
    }
  }
}

double wrap_deg(double a) {
  double w = std::fmod(a + 180.0, 360.0);
  if (w <= 0.0) w += 360.0;
  return w - 180.0;
}

}  // namespace

double SourceSpec::azimuth_at(double t) const {
  if (trajectory.empty()) return 0.0;
  if (t <= trajectory.front().first) return trajectory.front().second;
  for (std::size_t k = 1; k < trajectory.size(); ++k) {
    const auto& [t1, a1] = trajectory[k];
    if (t <= t1) {
      const auto& [t0, a0] = trajectory[k - 1];
      // Interpolate along the shorter arc.
      double delta = a1 - a0;
      if (delta > 180.0) delta -= 360.0;
      if (delta < -180.0) delta += 360.0;
      const double r = t1 > t0 ? (t - t0) / (t1 - t0) : 1.0;
      return wrap_deg(a0 + r * delta);
    }
  }
  return trajectory.back().second;
}

bool SourceSpec::active_at(double t) const {
  return std::any_of(activity.begin(), activity.end(), [&](const auto& iv) { return t >= iv.first && t < iv.second; });
}

std::size_t GroundTruth::active_frame_count() const {
  std::size_t count = 0;
  for (const auto& s : sources) count += static_cast<std::size_t>(std::count(s.active.begin(), s.active.end(), true));
  return count;
}

Eigen::Index GroundTruth::frame_at(double t) const {
  if (frame_times.empty()) return 0;
  const double hop_s = static_cast<double>(hop) / sample_rate;
  const double first = frame_times.front();
  const auto idx = static_cast<Eigen::Index>(std::lround((t - first) / hop_s));
  return std::clamp<Eigen::Index>(idx, 0, frame_count() - 1);
}

Eigen::VectorXd reverb_tap_gains(const ReverbSpec& reverb, double hop_s) {
  Eigen::VectorXd g(reverb.taps);
  g(0) = 1.0;
  double energy = 0.0;
  for (int q = 1; q < reverb.taps; ++q) {
    g(q) = std::exp(-q * hop_s / reverb.decay_s);
    energy += g(q) * g(q);
  }
  if (energy > 0.0) {
    const double target = std::pow(10.0, -reverb.drr_db / 10.0);
    g.tail(reverb.taps - 1) *= std::sqrt(target / energy);
  }
  return g;
}

Eigen::VectorXcd relative_ctf(const std::vector<Eigen::MatrixXcd>& planted, int bin) {
  const auto I = static_cast<Eigen::Index>(planted.size());
  const Eigen::Index Q = planted.front().cols();
  Eigen::VectorXcd out(I * Q - 1);
  const Complex ref = planted.front()(bin, 0);
  out.head(Q - 1) = planted.front().row(bin).tail(Q - 1).transpose() / ref;
  for (Eigen::Index i = 1; i < I; ++i) out.segment(Q - 1 + (i - 1) * Q, Q) = planted[static_cast<std::size_t>(i)].row(bin).transpose() / ref;
  return out;
}

namespace {

struct RenderedSources {
  std::vector<Eigen::VectorXd> excitations;  // gated, per source
  std::vector<std::vector<Eigen::MatrixXcd>> tails;  // per source, per channel (bins x taps)
};

RenderedSources prepare_sources(const SceneSpec& spec, const FrameAnalyzer& analyzer, Eigen::Index n) {
  RenderedSources out;
  const double hop_s = static_cast<double>(analyzer.hop()) / spec.sample_rate;
  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    const auto& src = spec.sources[k];
    auto rng = make_rng(spec.seed, 1, k);
    Eigen::VectorXd x = src.gain * make_excitation(src.excitation, n, spec.sample_rate, rng);
    x = x.cwiseProduct(activity_gate(src, n, spec.sample_rate));
    out.excitations.push_back(std::move(x));
    std::vector<Eigen::MatrixXcd> tails;
    auto tail_rng = make_rng(spec.seed, 2, k);
    const int taps = spec.reverb.enabled ? spec.reverb.taps : 1;
    for (int i = 0; i < spec.geometry.channel_count(); ++i) {
      tails.push_back(spec.reverb.enabled ? random_tail(spec.reverb, hop_s, analyzer.bin_count(), tail_rng)
                                          : Eigen::MatrixXcd::Zero(analyzer.bin_count(), taps));
    }
    out.tails.push_back(std::move(tails));
  }
  return out;
}

Eigen::MatrixXd make_noise(const SceneSpec& spec, Eigen::Index n) {
  const int I = spec.geometry.channel_count();
  Eigen::MatrixXd noise(n, I);
  auto rng = make_rng(spec.seed, 3, 0);
  for (int i = 0; i < I; ++i) {
    noise.col(i) = spec.noise.type == NoiseType::kWav ? looped_wav_channel(spec.noise.path, n, spec.sample_rate, i)
                                                      : gaussian_noise(n, rng);
  }
  return noise;
}

double noise_scale(const SceneSpec& spec, double signal_power, double noise_power) {
  if (!(noise_power > 0.0)) return 0.0;
  if (spec.noise.snr_db) {
    if (!(signal_power > 0.0)) {
      throw InputError("unreachable SNR: the scene has no active source energy to reference snr_db against");
    }
    return std::sqrt(signal_power / (noise_power * std::pow(10.0, *spec.noise.snr_db / 10.0)));
  }
  if (spec.noise.level_dbfs) return std::sqrt(std::pow(10.0, *spec.noise.level_dbfs / 10.0) / noise_power);
  return 0.0;
}

void attach_planted(GroundTruth& gt, const SceneSpec& spec, const RenderedSources& rs, Eigen::Index fft_size) {
  if (!spec.reverb.enabled) return;
  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    const Eigen::VectorXd delays = channel_delays(spec.geometry, spec.sources[k].azimuth_at(0.0), spec.sample_rate);
    auto planted = rs.tails[k];
    for (int i = 0; i < spec.geometry.channel_count(); ++i) fill_direct_tap(planted[static_cast<std::size_t>(i)], delays, i, fft_size);
    gt.sources[k].planted_ctf = std::move(planted);
  }
}

}  // namespace

std::pair<AudioBuffer, GroundTruth> render(const SceneSpec& spec) {
  validate_scene(spec);
  const auto n = static_cast<Eigen::Index>(std::llround(spec.duration_s * spec.sample_rate));
  FrameAnalyzer analyzer(spec.sample_rate, spec.analysis);
  const int I = spec.geometry.channel_count();
  const RenderedSources rs = prepare_sources(spec, analyzer, n);

  Eigen::MatrixXd image = Eigen::MatrixXd::Zero(n, I);
  Eigen::VectorXd any_active = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    const auto& src = spec.sources[k];
    image += render_direct_path(rs.excitations[k], src, spec.geometry, spec.sample_rate, analyzer.hop());
    if (spec.reverb.enabled && spec.reverb.taps > 1) {
      const Eigen::MatrixXcd S = stft_mono(analyzer, rs.excitations[k]);
      for (int i = 0; i < I; ++i) {
        const Eigen::MatrixXcd& taps = rs.tails[k][static_cast<std::size_t>(i)];
        Eigen::MatrixXcd tail = Eigen::MatrixXcd::Zero(S.rows(), S.cols());
        for (int q = 1; q < spec.reverb.taps; ++q) {
          if (S.cols() <= q) break;
          tail.rightCols(S.cols() - q) += taps.col(q).asDiagonal() * S.leftCols(S.cols() - q);
        }
        image.col(i) += istft_mono(analyzer, tail, n);
      }
    }
    any_active = any_active.cwiseMax(activity_gate(src, n, spec.sample_rate));
  }

  double signal_power = 0.0;
  Eigen::Index active_samples = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    if (any_active(s) > 0.0) {
      signal_power += image.row(s).squaredNorm();
      ++active_samples;
    }
  }
  if (active_samples > 0) signal_power /= static_cast<double>(active_samples * I);

  AudioBuffer audio;
  audio.sample_rate = spec.sample_rate;
  audio.samples = image;
  if (spec.noise.snr_db || spec.noise.level_dbfs) {
    const Eigen::MatrixXd noise = make_noise(spec, n);
    const double noise_power = noise.squaredNorm() / static_cast<double>(n * I);
    audio.samples += noise_scale(spec, signal_power, noise_power) * noise;
  }

  GroundTruth gt = make_truth(spec, analyzer, n);
  attach_planted(gt, spec, rs, analyzer.fft_size());
  return {std::move(audio), std::move(gt)};
}

std::pair<Spectrogram, GroundTruth> render_ctf_model(const SceneSpec& spec) {
  validate_scene(spec);
  const auto n = static_cast<Eigen::Index>(std::llround(spec.duration_s * spec.sample_rate));
  FrameAnalyzer analyzer(spec.sample_rate, spec.analysis);
  const int I = spec.geometry.channel_count();
  const RenderedSources rs = prepare_sources(spec, analyzer, n);
  GroundTruth gt = make_truth(spec, analyzer, n);
  const Eigen::Index T = gt.frame_count();
  const Eigen::Index F = analyzer.bin_count();

  Spectrogram out;
  out.window_length = analyzer.window_length();
  out.hop = analyzer.hop();
  out.fft_size = analyzer.fft_size();
  out.sample_rate = spec.sample_rate;
  out.channels.assign(static_cast<std::size_t>(I), Eigen::MatrixXcd::Zero(F, T));

  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    const Eigen::MatrixXcd S = stft_mono(analyzer, rs.excitations[k]);
    const int taps = static_cast<int>(rs.tails[k].front().cols());
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::VectorXd delays = channel_delays(spec.geometry, gt.sources[k].azimuth_deg[static_cast<std::size_t>(t)],
                                                    spec.sample_rate);
      for (int i = 0; i < I; ++i) {
        Eigen::MatrixXcd filt = rs.tails[k][static_cast<std::size_t>(i)];
        fill_direct_tap(filt, delays, i, analyzer.fft_size());
        auto col = out.channels[static_cast<std::size_t>(i)].col(t);
        for (int q = 0; q < taps && q <= t; ++q) col += filt.col(q).cwiseProduct(S.col(t - q));
      }
    }
  }

  if (spec.noise.snr_db || spec.noise.level_dbfs) {
    double signal_power = 0.0;
    Eigen::Index active = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const bool any = std::any_of(gt.sources.begin(), gt.sources.end(),
                                   [&](const SourceTruth& s) { return s.active[static_cast<std::size_t>(t)]; });
      if (!any) continue;
      for (int i = 0; i < I; ++i) signal_power += out.channels[static_cast<std::size_t>(i)].col(t).squaredNorm();
      ++active;
    }
    if (active > 0) signal_power /= static_cast<double>(active * I);
    const Eigen::MatrixXd noise = make_noise(spec, n);
    std::vector<Eigen::MatrixXcd> noise_spec;
    double noise_power = 0.0;
    for (int i = 0; i < I; ++i) {
      noise_spec.push_back(stft_mono(analyzer, noise.col(i)));
      noise_power += noise_spec.back().squaredNorm();
    }
    noise_power /= static_cast<double>(T * I);
    double scale = 0.0;
    if (spec.noise.snr_db) {
      scale = noise_scale(spec, signal_power, noise_power);
    } else {
      // Absolute level is defined in the time domain.
      scale = noise_scale(spec, 0.0, noise.squaredNorm() / static_cast<double>(n * I));
    }
    for (int i = 0; i < I; ++i) out.channels[static_cast<std::size_t>(i)] += scale * noise_spec[static_cast<std::size_t>(i)];
  }

  attach_planted(gt, spec, rs, analyzer.fft_size());
  return {std::move(out), std::move(gt)};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw InputError(where + ": unknown key '" + key + "'");
  }
}

std::vector<std::pair<double, double>> read_pairs(const json& j, const std::string& where) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw InputError(where + ": expected [a, b] pairs");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

json complex_matrix_to_json(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXcd complex_matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      m(r, c) = Complex(v.at(0).get<double>(), v.at(1).get<double>());
    }
  }
  return m;
}

}  // namespace

SceneSpec load_scene(const std::filesystem::path& path) {
  const std::string where = path.string();
  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(where + ": invalid JSON: " + e.what());
  }
  SceneSpec spec;
  try {
    reject_unknown(j, {"duration_s", "sample_rate", "seed", "geometry", "geometry_file", "sources", "reverb", "noise", "analysis"},
                   where);
    spec.duration_s = j.value("duration_s", spec.duration_s);
    spec.sample_rate = j.value("sample_rate", spec.sample_rate);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("geometry_file")) {
      spec.geometry = load_geometry(resolve(j["geometry_file"].get<std::string>()));
    } else {
      const auto& g = j.at("geometry");
      reject_unknown(g, {"mics", "speed_of_sound"}, where + ": geometry");
      for (const auto& m : g.at("mics")) spec.geometry.mics.emplace_back(m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>());
      spec.geometry.speed_of_sound = g.value("speed_of_sound", 343.0);
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      reject_unknown(a, {"window_ms", "hop_ms"}, where + ": analysis");
      spec.analysis.window_ms = a.value("window_ms", spec.analysis.window_ms);
      spec.analysis.hop_ms = a.value("hop_ms", spec.analysis.hop_ms);
    }
    for (const auto& s : j.value("sources", json::array())) {
      reject_unknown(s, {"trajectory", "activity", "excitation", "gain"}, where + ": source");
      SourceSpec src;
      src.trajectory = read_pairs(s.at("trajectory"), where + ": trajectory");
      src.activity = read_pairs(s.value("activity", json::array()), where + ": activity");
      src.gain = s.value("gain", 1.0);
      if (s.contains("excitation")) {
        const auto& e = s["excitation"];
        reject_unknown(e, {"type", "path", "f0_hz"}, where + ": excitation");
        const auto type = e.value("type", std::string("harmonic"));
        if (type == "white") {
          src.excitation.type = ExcitationType::kWhite;
        } else if (type == "speech_shaped") {
          src.excitation.type = ExcitationType::kSpeechShaped;
        } else if (type == "harmonic") {
          src.excitation.type = ExcitationType::kHarmonic;
        } else if (type == "wav") {
          src.excitation.type = ExcitationType::kWav;
          src.excitation.path = resolve(e.at("path").get<std::string>());
        } else {
          throw InputError(where + ": excitation.type '" + type + "' is not one of white|speech_shaped|harmonic|wav");
        }
        src.excitation.f0_hz = e.value("f0_hz", src.excitation.f0_hz);
      }
      spec.sources.push_back(std::move(src));
    }
    if (j.contains("reverb")) {
      const auto& r = j["reverb"];
      reject_unknown(r, {"type", "decay_s", "drr_db", "taps"}, where + ": reverb");
      const auto type = r.value("type", std::string("off"));
      if (type != "off" && type != "ctf") throw InputError(where + ": reverb.type must be off|ctf");
      spec.reverb.enabled = type == "ctf";
      spec.reverb.decay_s = r.value("decay_s", spec.reverb.decay_s);
      spec.reverb.drr_db = r.value("drr_db", spec.reverb.drr_db);
      spec.reverb.taps = r.value("taps", spec.reverb.taps);
    }
    if (j.contains("noise")) {
      const auto& nz = j["noise"];
      reject_unknown(nz, {"type", "snr_db", "level_dbfs", "path"}, where + ": noise");
      const auto type = nz.value("type", std::string("white"));
      if (type == "wav") {
        spec.noise.type = NoiseType::kWav;
        spec.noise.path = resolve(nz.at("path").get<std::string>());
      } else if (type != "white") {
        throw InputError(where + ": noise.type must be white|wav");
      }
      if (nz.contains("snr_db")) spec.noise.snr_db = nz["snr_db"].get<double>();
      if (nz.contains("level_dbfs")) spec.noise.level_dbfs = nz["level_dbfs"].get<double>();
    }
  } catch (const json::exception& e) {
    throw InputError(where + ": " + e.what());
  }
  validate_scene(spec);
  return spec;
}

void export_ground_truth(const GroundTruth& gt, const std::filesystem::path& path, const std::string& header_json) {
  json j;
  if (!header_json.empty()) j["header"] = json::parse(header_json);
  j["format"] = "doatrack-ground-truth-1";
  j["sample_rate"] = gt.sample_rate;
  j["window_length"] = gt.window_length;
  j["hop"] = gt.hop;
  j["fft_size"] = gt.fft_size;
  j["frame_times"] = gt.frame_times;
  j["sources"] = json::array();
  for (const auto& s : gt.sources) {
    json js;
    js["azimuth_deg"] = s.azimuth_deg;
    js["active"] = s.active;
    if (!s.planted_ctf.empty()) {
      js["planted_ctf"] = json::array();
      for (const auto& m : s.planted_ctf) js["planted_ctf"].push_back(complex_matrix_to_json(m));
    }
    j["sources"].push_back(std::move(js));
  }
  write_file_atomically(path, j.dump() + "\n");
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  const std::string where = path.string();
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(where + ": invalid JSON: " + e.what());
  }
  GroundTruth gt;
  try {
    if (j.value("format", std::string()) != "doatrack-ground-truth-1") {
      throw InputError(where + ": field 'format' is not doatrack-ground-truth-1");
    }
    gt.sample_rate = j.at("sample_rate").get<double>();
    gt.window_length = j.at("window_length").get<Eigen::Index>();
    gt.hop = j.at("hop").get<Eigen::Index>();
    gt.fft_size = j.at("fft_size").get<Eigen::Index>();
    gt.frame_times = j.at("frame_times").get<std::vector<double>>();
    for (const auto& js : j.at("sources")) {
      SourceTruth s;
      s.azimuth_deg = js.at("azimuth_deg").get<std::vector<double>>();
      s.active = js.at("active").get<std::vector<bool>>();
      if (s.azimuth_deg.size() != gt.frame_times.size() || s.active.size() != gt.frame_times.size()) {
        throw InputError(where + ": source arrays must have one entry per frame");
      }
      if (js.contains("planted_ctf")) {
        for (const auto& m : js["planted_ctf"]) s.planted_ctf.push_back(complex_matrix_from_json(m));
      }
      gt.sources.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw InputError(where + ": " + e.what());
  }
  return gt;
}

}  // namespace doatrack
