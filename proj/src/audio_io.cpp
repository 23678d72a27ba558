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

#include "doatrack/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doatrack/error.hpp"
#include "doatrack/io_util.hpp"

namespace doatrack {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load(const std::string& bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void store(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

void validate(const AudioBuffer& audio) {
  if (audio.channel_count() < 2) {
    throw InputError("audio must have at least 2 channels, found " + std::to_string(audio.channel_count()));
  }
  if (!(audio.sample_rate > 0.0)) {
    throw InputError("audio sample rate must be positive");
  }
  if (!audio.samples.allFinite()) {
    throw InputError("audio contains non-finite samples");
  }
}

void write_file_atomically(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto fail = [&](const std::string& why) { throw InputError(path.string() + ": " + why); };
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = static_cast<std::size_t>(load<std::uint32_t>(bytes, pos + 4));
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > bytes.size()) fail("truncated fmt chunk");
      format = load<std::uint16_t>(bytes, body);
      channels = load<std::uint16_t>(bytes, body + 2);
      rate = load<std::uint32_t>(bytes, body + 4);
      bits = load<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) fail("truncated extensible fmt chunk");
        format = load<std::uint16_t>(bytes, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_offset = body;
      data_size = std::min(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) fail("missing fmt chunk");
  if (data_offset == 0) fail("missing data chunk");
  if (channels == 0) fail("zero channels");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
         " bits); expected 16-bit PCM or 32-bit float");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const auto frames = static_cast<Eigen::Index>(data_size / frame_bytes);

  AudioBuffer audio;
  audio.sample_rate = rate;
  audio.samples.resize(frames, channels);
  for (Eigen::Index n = 0; n < frames; ++n) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      const std::size_t off = data_offset + static_cast<std::size_t>(n) * frame_bytes +
                              static_cast<std::size_t>(c) * (bits / 8);
      audio.samples(n, c) = pcm16 ? load<std::int16_t>(bytes, off) / 32768.0
                                  : static_cast<double>(load<float>(bytes, off));
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavEncoding encoding) {
  const auto channels = static_cast<std::uint16_t>(audio.channel_count());
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const auto data_size = static_cast<std::uint32_t>(audio.length() * channels * (bits / 8));

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  store<std::uint32_t>(out, 36 + data_size);
  out += "WAVEfmt ";
  store<std::uint32_t>(out, 16);
  store<std::uint16_t>(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  store<std::uint16_t>(out, channels);
  store<std::uint32_t>(out, rate);
  store<std::uint32_t>(out, rate * channels * (bits / 8));
  store<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  store<std::uint16_t>(out, bits);
  out += "data";
  store<std::uint32_t>(out, data_size);
  for (Eigen::Index n = 0; n < audio.length(); ++n) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double x = audio.samples(n, c);
      if (encoding == WavEncoding::kPcm16) {
        const double scaled = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
        store<std::int16_t>(out, static_cast<std::int16_t>(scaled));
      } else {
        store<float>(out, static_cast<float>(x));
      }
    }
  }
  write_file_atomically(path, out);
}

}  // namespace doatrack
