#include "bmt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bmt/common.hpp"
#include "bmt/rng.hpp"

namespace bmt {

namespace {

constexpr double kMinDwellS = 25.0;
constexpr int kStationarityRangeS = 6;
constexpr int kNuisanceRank = 8;

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  int state = 0;
};

// Each file leans toward one dominant state so that session-level state
// shares separate cleanly into extremes (sessions are binarized the way the
// evaluation protocol expects). Segment states are drawn iid from the
// preference weights; repeated states simply merge into longer stationary
// regions, so every dwell stays exponential with the configured mean.
constexpr double kDominantWeight = 6.0;

int draw_state(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (int s = 0; s < static_cast<int>(weights.size()); ++s) {
    u -= weights[static_cast<std::size_t>(s)];
    if (u < 0.0) return s;
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<Segment> sample_segments(double duration_s, double dwell_s, int n_states,
                                     int dominant_state, Rng& rng) {
  std::vector<double> weights(static_cast<std::size_t>(n_states), 1.0);
  weights[static_cast<std::size_t>(dominant_state)] = kDominantWeight;

  std::vector<Segment> segs;
  double t = 0.0;
  while (t < duration_s) {
    const int state = draw_state(weights, rng);
    const double u = (static_cast<double>(rng.next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double dwell = std::max(kMinDwellS, -dwell_s * std::log(u));
    segs.push_back({t, std::min(duration_s, t + dwell), state});
    t += dwell;
  }
  return segs;
}

// Binarized extremes per state code: top third of files by dwell share get
// label 1, bottom third 0, the middle stays unlabeled.
std::vector<LabelRow> extreme_labels(const std::vector<std::vector<double>>& fractions,
                                     int n_files, int n_states) {
  std::vector<LabelRow> rows;
  const int n_lab = std::max(1, n_files / 3);
  for (int s = 0; s < n_states; ++s) {
    std::vector<std::pair<double, int>> ranked;
    for (int f = 0; f < n_files; ++f)
      ranked.emplace_back(fractions[static_cast<std::size_t>(f)][static_cast<std::size_t>(s)],
                          f);
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::pair<int, int>> labeled;  // file -> label
    for (int r = 0; r < n_lab; ++r) labeled.emplace_back(ranked[static_cast<std::size_t>(r)].second, 0);
    for (int r = n_files - n_lab; r < n_files; ++r)
      labeled.emplace_back(ranked[static_cast<std::size_t>(r)].second, 1);
    std::sort(labeled.begin(), labeled.end());
    for (const auto& [f, label] : labeled) {
      const std::string id = synth_file_id(f, n_files);
      rows.push_back({id, id, "state" + std::to_string(s), label});
    }
  }
  return rows;
}

// Occupancy share of each state within [t0, t1].
std::vector<double> window_occupancy(const std::vector<Segment>& segs, double t0,
                                     double t1, int n_states) {
  std::vector<double> occ(static_cast<std::size_t>(n_states), 0.0);
  for (const auto& s : segs) {
    const double lo = std::max(t0, s.start_s);
    const double hi = std::min(t1, s.end_s);
    if (hi > lo) occ[static_cast<std::size_t>(s.state)] += hi - lo;
  }
  const double total = std::accumulate(occ.begin(), occ.end(), 0.0);
  if (total > 0.0)
    for (auto& v : occ) v /= total;
  return occ;
}

}  // namespace

std::string synth_file_id(int index, int n_files) {
  const int width = n_files > 100 ? 3 : 2;
  std::string digits = std::to_string(index);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return "synth" + digits;
}

SynthCorpus generate(const SynthConfig& cfg) {
  require(cfg.n_states >= 2, "n_states must be >= 2");
  require(cfg.n_files >= 1, "n_files must be >= 1");
  require(cfg.nuisance_strength >= 0.0 && cfg.nuisance_strength <= 1.0,
          "nuisance_strength must be in [0,1]");
  require(cfg.noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(cfg.behavior_dwell_s > cfg.window_s,
          "behavior_dwell_s must exceed the analysis window");
  require(cfg.file_duration_s >= cfg.window_s, "files must cover one analysis window");

  // State means are shared across the corpus and drawn before any file stream.
  Rng state_rng(derive_stream_seed(cfg.seed, "states"));
  std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(cfg.n_states));
  for (auto& m : means) {
    m.resize(cfg.dim);
    for (Eigen::Index d = 0; d < cfg.dim; ++d) m[d] = cfg.state_scale * state_rng.gaussian();
  }

  // Nuisance factors share a low-rank basis (channel/speaker-like variation):
  // per-file vectors are coordinates in this subspace, so held-out files stay
  // on the same manifold the model trains on.
  Rng basis_rng(derive_stream_seed(cfg.seed, "nuisance-basis"));
  Eigen::MatrixXd nuisance_basis(cfg.dim, kNuisanceRank);
  const double basis_scale = 1.0 / std::sqrt(static_cast<double>(kNuisanceRank));
  for (Eigen::Index d = 0; d < cfg.dim; ++d)
    for (int r = 0; r < kNuisanceRank; ++r)
      nuisance_basis(d, r) = basis_scale * basis_rng.gaussian();

  const auto n_frames = static_cast<Eigen::Index>(
      std::floor((cfg.file_duration_s - cfg.window_s) / cfg.shift_s) + 1);
  require(n_frames >= 1, "file too short for one analysis frame");

  SynthCorpus corpus;
  corpus.files.resize(static_cast<std::size_t>(cfg.n_files));
  corpus.frame_states.resize(static_cast<std::size_t>(cfg.n_files));
  corpus.state_fractions.assign(static_cast<std::size_t>(cfg.n_files),
                                std::vector<double>(static_cast<std::size_t>(cfg.n_states), 0.0));

  for (int f = 0; f < cfg.n_files; ++f) {
    const std::string id = synth_file_id(f, cfg.n_files);
    Rng rng(derive_stream_seed(cfg.seed, id));

    Eigen::VectorXd nuisance_coords(kNuisanceRank);
    for (int r = 0; r < kNuisanceRank; ++r) nuisance_coords[r] = rng.gaussian();
    const Eigen::VectorXd nuisance = nuisance_basis * nuisance_coords;

    const int dominant = f % cfg.n_states;  // round-robin so every state has extremes
    const auto segs = sample_segments(cfg.file_duration_s, cfg.behavior_dwell_s,
                                      cfg.n_states, dominant, rng);
    for (const auto& s : segs)
      corpus.state_fractions[static_cast<std::size_t>(f)][static_cast<std::size_t>(s.state)] +=
          (s.end_s - s.start_s) / cfg.file_duration_s;

    FrameSequence& seq = corpus.files[static_cast<std::size_t>(f)];
    seq.window_s = cfg.window_s;
    seq.shift_s = cfg.shift_s;
    seq.source_id = id;
    seq.values.resize(n_frames, cfg.dim);
    auto& states = corpus.frame_states[static_cast<std::size_t>(f)];
    states.resize(static_cast<std::size_t>(n_frames));

    for (Eigen::Index i = 0; i < n_frames; ++i) {
      const double t0 = static_cast<double>(i) * cfg.shift_s;
      const auto occ = window_occupancy(segs, t0, t0 + cfg.window_s, cfg.n_states);
      Eigen::VectorXd clean = Eigen::VectorXd::Zero(cfg.dim);
      for (int s = 0; s < cfg.n_states; ++s)
        if (occ[static_cast<std::size_t>(s)] > 0.0)
          clean += occ[static_cast<std::size_t>(s)] * means[static_cast<std::size_t>(s)];
      clean += cfg.nuisance_strength * nuisance;
      for (Eigen::Index d = 0; d < cfg.dim; ++d)
        seq.values(i, d) =
            static_cast<float>(clean[d] + cfg.noise_sigma * rng.gaussian());
      states[static_cast<std::size_t>(i)] = static_cast<int>(
          std::max_element(occ.begin(), occ.end()) - occ.begin());
    }
  }

  corpus.labels = extreme_labels(corpus.state_fractions, cfg.n_files, cfg.n_states);

  // Measured stationarity: same frame-level state within +-6 s of context.
  const auto k = static_cast<Eigen::Index>(
      std::lround(kStationarityRangeS / cfg.shift_s));
  std::size_t same = 0, pairs = 0;
  for (const auto& states : corpus.frame_states) {
    const auto n = static_cast<Eigen::Index>(states.size());
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = std::max<Eigen::Index>(0, i - k);
           j <= std::min(n - 1, i + k); ++j) {
        if (i == j) continue;
        ++pairs;
        if (states[static_cast<std::size_t>(i)] == states[static_cast<std::size_t>(j)]) ++same;
      }
  }
  corpus.stationarity_prob = pairs ? static_cast<double>(same) / pairs : 1.0;
  return corpus;
}

AudioSynthCorpus generate_audio(const SynthConfig& cfg) {
  require(cfg.n_states >= 2 && cfg.n_states <= 6, "audio mode supports 2..6 states");
  require(cfg.file_duration_s >= cfg.window_s, "files must cover one analysis window");
  const int fs = kLldSampleRate;
  static const double kF0[6] = {120.0, 180.0, 240.0, 320.0, 150.0, 280.0};
  static const double kLevel[6] = {0.20, 0.35, 0.50, 0.65, 0.28, 0.42};

  const auto n_frames = static_cast<Eigen::Index>(
      std::floor((cfg.file_duration_s - cfg.window_s) / cfg.shift_s) + 1);

  AudioSynthCorpus out;
  std::vector<std::vector<double>> fractions(
      static_cast<std::size_t>(cfg.n_files),
      std::vector<double>(static_cast<std::size_t>(cfg.n_states), 0.0));
  for (int f = 0; f < cfg.n_files; ++f) {
    const std::string id = synth_file_id(f, cfg.n_files) + "#audio";
    Rng rng(derive_stream_seed(cfg.seed, id));
    const double gain = 1.0 + 0.4 * cfg.nuisance_strength * (rng.uniform() - 0.5);
    const int dominant = f % cfg.n_states;  // round-robin so every state has extremes
    const auto segs = sample_segments(cfg.file_duration_s, cfg.behavior_dwell_s,
                                      cfg.n_states, dominant, rng);

    AudioBuffer audio;
    audio.sample_rate_hz = fs;
    audio.samples.resize(static_cast<std::size_t>(cfg.file_duration_s * fs), 0.0);
    for (const auto& seg : segs) {
      fractions[static_cast<std::size_t>(f)][static_cast<std::size_t>(seg.state)] +=
          (seg.end_s - seg.start_s) / cfg.file_duration_s;
      const auto i0 = static_cast<std::size_t>(seg.start_s * fs);
      const auto i1 = std::min(audio.samples.size(),
                               static_cast<std::size_t>(seg.end_s * fs));
      const double f0 = kF0[seg.state];
      const double level = kLevel[seg.state] * gain;
      for (std::size_t i = i0; i < i1; ++i) {
        const double t = static_cast<double>(i) / fs;
        audio.samples[i] = level * std::sin(2.0 * 3.14159265358979323846 * f0 * t) +
                           0.01 * rng.gaussian();
      }
    }

    std::vector<int> states(static_cast<std::size_t>(n_frames));
    for (Eigen::Index i = 0; i < n_frames; ++i) {
      const double t0 = static_cast<double>(i) * cfg.shift_s;
      const auto occ = window_occupancy(segs, t0, t0 + cfg.window_s, cfg.n_states);
      states[static_cast<std::size_t>(i)] =
          static_cast<int>(std::max_element(occ.begin(), occ.end()) - occ.begin());
    }
    out.frame_states.push_back(std::move(states));
    out.audio.push_back(std::move(audio));
  }

  out.labels = extreme_labels(fractions, cfg.n_files, cfg.n_states);
  return out;
}

}  // namespace bmt
