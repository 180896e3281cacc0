#include "bmt/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bmt/common.hpp"
#include "bmt/io_util.hpp"

namespace bmt {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint32_t rd_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open wav file: " + path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  require(raw.size() >= 44, "invalid wav file (too small): " + path.string());
  require(std::memcmp(raw.data(), "RIFF", 4) == 0 && std::memcmp(raw.data() + 8, "WAVE", 4) == 0,
          "invalid wav file (not RIFF/WAVE): " + path.string());

  int channels = 0, bits = 0, rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const std::uint32_t len = rd_u32(raw.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > raw.size()) break;
    if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
      const std::uint16_t fmt = rd_u16(raw.data() + body);
      require(fmt == 1, "unsupported wav encoding (PCM required): " + path.string());
      channels = rd_u16(raw.data() + body + 2);
      rate = static_cast<int>(rd_u32(raw.data() + body + 4));
      bits = rd_u16(raw.data() + body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = raw.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  require(data != nullptr && channels > 0, "invalid wav file (missing chunks): " + path.string());
  require(bits == 16, "unsupported wav sample width (16-bit PCM required): " + path.string());
  require(channels == 1 || channels == 2,
          "unsupported channel count (mono or stereo required): " + path.string());

  const std::size_t n = data_len / (2 * channels);
  require(n > 0, "invalid wav file (empty data): " + path.string());

  AudioBuffer out;
  out.sample_rate_hz = rate;
  out.samples.resize(n);
  const double scale = 1.0 / 32768.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t a, b = 0;
    std::memcpy(&a, data + 2 * channels * i, 2);
    if (channels == 2) std::memcpy(&b, data + 2 * channels * i + 2, 2);
    const double v = (channels == 2) ? 0.5 * (double(a) + double(b)) : double(a);
    out.samples[i] = v * scale;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
  atomic_write_file(path, [&](std::ostream& os) {
    const std::uint32_t data_len = n * 2;
    const std::uint32_t riff_len = 36 + data_len;
    os.write("RIFF", 4);
    write_pod(os, riff_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    write_pod<std::uint32_t>(os, 16);
    write_pod<std::uint16_t>(os, 1);  // PCM
    write_pod<std::uint16_t>(os, 1);  // mono
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(audio.sample_rate_hz));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(audio.sample_rate_hz * 2));
    write_pod<std::uint16_t>(os, 2);
    write_pod<std::uint16_t>(os, 16);
    os.write("data", 4);
    write_pod(os, data_len);
    for (std::uint32_t i = 0; i < n; ++i) {
      const double clipped = std::clamp(audio.samples[i], -1.0, 1.0);
      const auto v = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
      write_pod(os, v);
    }
  });
}

AudioBuffer resample(const AudioBuffer& in, int target_rate_hz) {
  require(in.sample_rate_hz > 0 && target_rate_hz > 0, "invalid sample rate");
  if (in.sample_rate_hz == target_rate_hz) return in;

  const double ratio = double(in.sample_rate_hz) / double(target_rate_hz);
  const auto n_out = static_cast<std::size_t>(std::floor(double(in.samples.size()) / ratio));
  require(n_out > 0, "insufficient audio");

  // Hann-windowed sinc, 32 zero crossings, cutoff below the narrower Nyquist.
  const int half_taps = 32;
  const double cutoff = 0.95 * std::min(1.0, 1.0 / ratio);

  AudioBuffer out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(n_out);
  const auto n_in = static_cast<std::ptrdiff_t>(in.samples.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double center = double(i) * ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(center)) - half_taps + 1;
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(center)) + half_taps;
    double acc = 0.0, wsum = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double t = (double(j) - center) * cutoff;
      const double sinc = (std::abs(t) < 1e-12) ? 1.0 : std::sin(kPi * t) / (kPi * t);
      const double u = (double(j) - center) / half_taps;
      const double win = 0.5 * (1.0 + std::cos(kPi * std::clamp(u, -1.0, 1.0)));
      const double w = sinc * win;
      wsum += w;
      if (j >= 0 && j < n_in) acc += w * in.samples[j];
    }
    out.samples[i] = (wsum > 0.0) ? acc / wsum : 0.0;
  }
  return out;
}

}  // namespace bmt
