#pragma once

#include <filesystem>
#include <vector>

namespace bmt {

struct AudioBuffer {
  std::vector<double> samples;  // mono, amplitudes in [-1, 1]
  int sample_rate_hz = 0;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// RIFF WAV, 16-bit PCM. Stereo is downmixed by averaging the two channels.
AudioBuffer read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

// Windowed-sinc resampler; returns the input unchanged when rates match.
AudioBuffer resample(const AudioBuffer& in, int target_rate_hz);

}  // namespace bmt
