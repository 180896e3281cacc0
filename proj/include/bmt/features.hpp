#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bmt/audio.hpp"

namespace bmt {

using MatrixXfRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Low-level descriptor extraction settings. The default layout is frozen:
// 35 base descriptors [pitch, intensity, 15 MFCC, 8 MFB, 8 LPC, jitter, shimmer]
// plus their 35 delta columns, 70 in total.
struct LldConfig {
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  int n_mfcc = 15;
  int n_mfb = 8;
  int n_lpc = 8;
  // Pitch search range. The upper bound is 500 Hz so that tones up to the
  // top of the speaking range (used by the tone checks) resolve without
  // octave folding.
  double pitch_min_hz = 60.0;
  double pitch_max_hz = 500.0;
  double voicing_threshold = 0.45;

  int n_base() const { return 2 + n_mfcc + n_mfb + n_lpc + 2; }
  int n_lld() const { return 2 * n_base(); }
};

constexpr int kFunctionalCount = 6;  // pct01, pct99, range, mean, median, stddev
constexpr int kLldSampleRate = 16000;

struct LldSequence {
  Eigen::MatrixXd frames;  // T x n_lld, deltas in the right half
  double hop_ms = 10.0;
  double frame_len_ms = 25.0;
  int n_base = 35;
};

// One analysis frame per `shift_s` of audio; row i starts at t = i * shift_s.
struct FrameSequence {
  MatrixXfRM values;  // n_frames x dim
  double window_s = 20.0;
  double shift_s = 1.0;
  std::string source_id;

  Eigen::Index size() const { return values.rows(); }
  int dim() const { return static_cast<int>(values.cols()); }
  double t_start(Eigen::Index i) const { return static_cast<double>(i) * shift_s; }
};

LldSequence compute_lld_sequence(const AudioBuffer& audio, const LldConfig& cfg);

// 6 statistical functionals per LLD column, functional-major:
// out[f * n_cols + c] = functional f of column c.
Eigen::VectorXd compute_functionals(const Eigen::Ref<const Eigen::MatrixXd>& window);

FrameSequence extract_analysis_frames(const LldSequence& llds, double window_s,
                                      double shift_s, const std::string& source_id);

// Full pipeline: downmixed audio -> resample to 16 kHz -> LLDs -> functionals.
FrameSequence extract_features(const AudioBuffer& audio, const LldConfig& cfg,
                               double window_s, double shift_s,
                               const std::string& source_id);

std::vector<std::string> lld_column_names(const LldConfig& cfg);
std::vector<std::string> feature_column_names(const LldConfig& cfg);

}  // namespace bmt
