#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmt/audio.hpp"
#include "bmt/evaluation.hpp"
#include "bmt/features.hpp"

namespace bmt {

// Piecewise-constant latent behavior states with per-file nuisance vectors:
//   frame = blend(state means over window) + nuisance_strength * u_file + noise.
// Dwell times are exponential with mean behavior_dwell_s, clipped to >= 25 s,
// so the stationarity assumption holds by construction.
struct SynthConfig {
  int n_files = 20;
  double file_duration_s = 120.0;
  double behavior_dwell_s = 45.0;
  int n_states = 4;
  double nuisance_strength = 0.8;
  double noise_sigma = 0.35;
  std::uint64_t seed = 1;
  double window_s = 20.0;
  double shift_s = 1.0;
  int dim = 420;
  double state_scale = 0.25;  // per-dim stddev of the state mean vectors
};

struct SynthCorpus {
  std::vector<FrameSequence> files;            // generated directly in feature space
  std::vector<std::vector<int>> frame_states;  // ground truth per file, per frame
  std::vector<LabelRow> labels;                // per-state codes, median-split binarized
  std::vector<std::vector<double>> state_fractions;  // per file, per state dwell share
  double stationarity_prob = 0.0;  // P(same state) within a +-6 s context window
};

SynthCorpus generate(const SynthConfig& cfg);

// Audio-mode corpus for end-to-end pipeline checks: one tone per behavior
// state (state-dependent pitch and level) plus a per-file gain nuisance.
struct AudioSynthCorpus {
  std::vector<AudioBuffer> audio;
  std::vector<std::vector<int>> frame_states;  // same window/shift convention
  std::vector<LabelRow> labels;
};

AudioSynthCorpus generate_audio(const SynthConfig& cfg);

std::string synth_file_id(int index, int n_files);

}  // namespace bmt
