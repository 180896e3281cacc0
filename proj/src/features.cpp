#include "bmt/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "bmt/common.hpp"

namespace bmt {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-10;

// ---------------------------------------------------------------------------
// spectral helpers

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// n_filters triangular filters over power-spectrum bins [0, n_bins).
std::vector<std::vector<double>> mel_filterbank(int n_filters, int n_bins, int fft_size,
                                                int sample_rate) {
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_filters + 2);
  for (int i = 0; i < n_filters + 2; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * i / (n_filters + 1);
    centers[i] = mel_to_hz(mel) * fft_size / sample_rate;
  }
  std::vector<std::vector<double>> bank(n_filters, std::vector<double>(n_bins, 0.0));
  for (int f = 0; f < n_filters; ++f) {
    const double lo = centers[f], mid = centers[f + 1], hi = centers[f + 2];
    for (int b = 0; b < n_bins; ++b) {
      if (b > lo && b < mid)
        bank[f][b] = (b - lo) / (mid - lo);
      else if (b >= mid && b < hi)
        bank[f][b] = (hi - b) / (hi - mid);
    }
  }
  return bank;
}

// Orthonormal DCT-II of the log mel energies, first n_out coefficients.
std::vector<double> dct2(const std::vector<double>& in, int n_out) {
  const int n = static_cast<int>(in.size());
  std::vector<double> out(n_out, 0.0);
  for (int k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += in[i] * std::cos(kPi * k * (2 * i + 1) / (2.0 * n));
    const double scale = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    out[k] = scale * acc;
  }
  return out;
}

// Levinson-Durbin on biased autocorrelation; returns forward predictor
// coefficients a[1..order] of x[n] ~ sum a[i] x[n-i].
std::vector<double> lpc_coeffs(const std::vector<double>& frame, int order) {
  const int n = static_cast<int>(frame.size());
  std::vector<double> r(order + 1, 0.0);
  for (int lag = 0; lag <= order; ++lag)
    for (int i = lag; i < n; ++i) r[lag] += frame[i] * frame[i - lag];

  std::vector<double> a(order, 0.0);
  if (r[0] <= 1e-12) return a;  // silent frame

  std::vector<double> cur(order + 1, 0.0), prev(order + 1, 0.0);
  double err = r[0];
  for (int m = 1; m <= order; ++m) {
    double acc = r[m];
    for (int i = 1; i < m; ++i) acc -= prev[i] * r[m - i];
    const double k = acc / err;
    cur = prev;
    cur[m] = k;
    for (int i = 1; i < m; ++i) cur[i] = prev[i] - k * prev[m - i];
    err *= (1.0 - k * k);
    if (err <= 0.0) break;
    prev = cur;
  }
  for (int i = 0; i < order; ++i) a[i] = cur[i + 1];
  return a;
}

// ---------------------------------------------------------------------------
// pitch and voice quality

struct PitchResult {
  double f0 = 0.0;  // 0 when unvoiced
  bool voiced = false;
};

// Normalized cross-correlation peak; smallest lag within 85% of the best peak
// wins, which keeps subharmonics from halving the estimate.
PitchResult estimate_pitch(const std::vector<double>& x, int sample_rate,
                           const LldConfig& cfg) {
  const int n = static_cast<int>(x.size());
  const int lag_min = std::max(2, static_cast<int>(std::floor(sample_rate / cfg.pitch_max_hz)));
  const int lag_max = std::min(n - 2, static_cast<int>(std::ceil(sample_rate / cfg.pitch_min_hz)));
  PitchResult res;
  if (lag_max <= lag_min) return res;

  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (energy / n < 1e-9) return res;  // silence

  std::vector<double> rho(lag_max + 1, 0.0);
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (int i = 0; i + lag < n; ++i) {
      num += x[i] * x[i + lag];
      e0 += x[i] * x[i];
      e1 += x[i + lag] * x[i + lag];
    }
    const double den = std::sqrt(e0 * e1);
    rho[lag] = (den > 1e-12) ? num / den : 0.0;
  }

  double best = 0.0;
  for (int lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, rho[lag]);
  if (best < cfg.voicing_threshold) return res;

  int chosen = 0;
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    const bool peak = (lag == lag_min || rho[lag] >= rho[lag - 1]) &&
                      (lag == lag_max || rho[lag] >= rho[lag + 1]);
    if (peak && rho[lag] >= 0.85 * best && rho[lag] >= cfg.voicing_threshold) {
      chosen = lag;
      break;
    }
  }
  if (chosen == 0) return res;

  // parabolic refinement around the peak
  double lag_f = chosen;
  if (chosen > lag_min && chosen < lag_max) {
    const double y0 = rho[chosen - 1], y1 = rho[chosen], y2 = rho[chosen + 1];
    const double den = y0 - 2.0 * y1 + y2;
    if (std::abs(den) > 1e-12) {
      const double delta = 0.5 * (y0 - y2) / den;
      if (std::abs(delta) <= 1.0) lag_f += delta;
    }
  }
  res.voiced = true;
  res.f0 = std::clamp(double(sample_rate) / lag_f, cfg.pitch_min_hz, cfg.pitch_max_hz);
  return res;
}

// Cycle marks found by stepping one period at a time from the strongest peak,
// re-anchoring each mark on the local maximum within +-12% of the period.
std::vector<int> find_cycle_marks(const std::vector<double>& x, double period) {
  const int n = static_cast<int>(x.size());
  const int radius = std::max(1, static_cast<int>(std::lround(0.12 * period)));
  const int anchor =
      static_cast<int>(std::max_element(x.begin(), x.end()) - x.begin());

  auto refine = [&](double expected) -> int {
    const int lo = std::max(0, static_cast<int>(std::lround(expected)) - radius);
    const int hi = std::min(n - 1, static_cast<int>(std::lround(expected)) + radius);
    if (lo > hi) return -1;
    int best = lo;
    for (int i = lo + 1; i <= hi; ++i)
      if (x[i] > x[best]) best = i;
    return best;
  };

  std::vector<int> marks{anchor};
  for (double next = anchor + period; next < n - 1; next += period) {
    const int m = refine(next);
    if (m < 0 || m <= marks.back()) break;
    marks.push_back(m);
    next = m;
  }
  for (double prev = anchor - period; prev > 0; prev -= period) {
    const int m = refine(prev);
    if (m < 0 || m >= marks.front()) break;
    marks.insert(marks.begin(), m);
    prev = m;
  }
  return marks;
}

struct VoiceQuality {
  double jitter = 0.0;
  double shimmer = 0.0;
};

VoiceQuality jitter_shimmer(const std::vector<double>& x, double f0, int sample_rate) {
  VoiceQuality vq;
  if (f0 <= 0.0) return vq;
  const double period = sample_rate / f0;
  const auto marks = find_cycle_marks(x, period);
  if (marks.size() < 3) return vq;  // need two full cycles

  std::vector<double> periods, amps;
  for (std::size_t i = 0; i + 1 < marks.size(); ++i)
    periods.push_back(double(marks[i + 1] - marks[i]));
  for (int m : marks) amps.push_back(std::abs(x[m]));

  const double mean_t = std::accumulate(periods.begin(), periods.end(), 0.0) / periods.size();
  const double mean_a = std::accumulate(amps.begin(), amps.end(), 0.0) / amps.size();

  double dt = 0.0;
  for (std::size_t i = 0; i + 1 < periods.size(); ++i)
    dt += std::abs(periods[i + 1] - periods[i]);
  if (periods.size() > 1 && mean_t > 0.0)
    vq.jitter = (dt / (periods.size() - 1)) / mean_t;

  double da = 0.0;
  for (std::size_t i = 0; i + 1 < amps.size(); ++i) da += std::abs(amps[i + 1] - amps[i]);
  if (amps.size() > 1 && mean_a > 1e-12) vq.shimmer = (da / (amps.size() - 1)) / mean_a;
  return vq;
}

// Two-point regression deltas over +-2 frames with replicated edges.
Eigen::MatrixXd delta_columns(const Eigen::MatrixXd& base) {
  const Eigen::Index t_max = base.rows();
  Eigen::MatrixXd out(t_max, base.cols());
  auto clip = [&](Eigen::Index t) { return std::clamp<Eigen::Index>(t, 0, t_max - 1); };
  for (Eigen::Index t = 0; t < t_max; ++t)
    out.row(t) = (base.row(clip(t + 1)) - base.row(clip(t - 1)) +
                  2.0 * (base.row(clip(t + 2)) - base.row(clip(t - 2)))) /
                 10.0;
  return out;
}

// Linear-interpolated percentile of a sorted vector, q in [0, 1].
double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * (sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

LldSequence compute_lld_sequence(const AudioBuffer& audio, const LldConfig& cfg) {
  require(audio.sample_rate_hz >= 8000, "sample rate below 8 kHz is unsupported");
  for (double v : audio.samples)
    require(std::isfinite(v), "non-finite samples in audio input");

  const int fs = audio.sample_rate_hz;
  const int frame_len = static_cast<int>(std::lround(cfg.frame_len_ms * fs / 1000.0));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * fs / 1000.0));
  require(frame_len > hop && hop > 0, "frame_len_ms must exceed hop_ms");
  require(static_cast<int>(audio.samples.size()) >= frame_len,
          "insufficient audio: shorter than one LLD frame");

  const auto n_frames =
      static_cast<Eigen::Index>((audio.samples.size() - frame_len) / hop + 1);

  int fft_size = 1;
  while (fft_size < frame_len) fft_size <<= 1;
  const int n_bins = fft_size / 2 + 1;
  const auto mfcc_bank = mel_filterbank(26, n_bins, fft_size, fs);
  const auto mfb_bank = mel_filterbank(cfg.n_mfb, n_bins, fft_size, fs);

  std::vector<double> hamming(frame_len);
  for (int i = 0; i < frame_len; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (frame_len - 1));

  const int n_base = cfg.n_base();
  Eigen::MatrixXd base(n_frames, n_base);

  std::vector<double> raw(frame_len), windowed(frame_len);
  std::vector<std::complex<double>> spec(fft_size);
  std::vector<double> power(n_bins);

  for (Eigen::Index f = 0; f < n_frames; ++f) {
    const double* src = audio.samples.data() + f * hop;
    double mean = 0.0;
    for (int i = 0; i < frame_len; ++i) mean += src[i];
    mean /= frame_len;
    for (int i = 0; i < frame_len; ++i) raw[i] = src[i] - mean;  // DC removal
    for (int i = 0; i < frame_len; ++i) windowed[i] = raw[i] * hamming[i];

    // intensity (dB, floored so silence is exactly -100)
    double msq = 0.0;
    for (int i = 0; i < frame_len; ++i) msq += src[i] * src[i];
    msq /= frame_len;
    const double intensity = 10.0 * std::log10(msq + kLogFloor);

    const PitchResult pitch = estimate_pitch(raw, fs, cfg);
    const VoiceQuality vq =
        pitch.voiced ? jitter_shimmer(raw, pitch.f0, fs) : VoiceQuality{};

    for (int i = 0; i < fft_size; ++i)
      spec[i] = (i < frame_len) ? std::complex<double>(windowed[i], 0.0)
                                : std::complex<double>(0.0, 0.0);
    fft_radix2(spec);
    for (int b = 0; b < n_bins; ++b) power[b] = std::norm(spec[b]);

    std::vector<double> log_mel(26);
    for (int m = 0; m < 26; ++m) {
      double acc = 0.0;
      for (int b = 0; b < n_bins; ++b) acc += mfcc_bank[m][b] * power[b];
      log_mel[m] = std::log(std::max(acc, kLogFloor));
    }
    const auto mfcc = dct2(log_mel, cfg.n_mfcc);

    std::vector<double> mfb(cfg.n_mfb);
    for (int m = 0; m < cfg.n_mfb; ++m) {
      double acc = 0.0;
      for (int b = 0; b < n_bins; ++b) acc += mfb_bank[m][b] * power[b];
      mfb[m] = std::log(std::max(acc, kLogFloor));
    }

    const auto lpc = lpc_coeffs(windowed, cfg.n_lpc);

    int c = 0;
    base(f, c++) = pitch.f0;
    base(f, c++) = intensity;
    for (int i = 0; i < cfg.n_mfcc; ++i) base(f, c++) = mfcc[i];
    for (int i = 0; i < cfg.n_mfb; ++i) base(f, c++) = mfb[i];
    for (int i = 0; i < cfg.n_lpc; ++i) base(f, c++) = lpc[i];
    base(f, c++) = vq.jitter;
    base(f, c++) = vq.shimmer;
  }

  LldSequence seq;
  seq.hop_ms = cfg.hop_ms;
  seq.frame_len_ms = cfg.frame_len_ms;
  seq.n_base = n_base;
  seq.frames.resize(n_frames, 2 * n_base);
  seq.frames.leftCols(n_base) = base;
  seq.frames.rightCols(n_base) = delta_columns(base);
  return seq;
}

Eigen::VectorXd compute_functionals(const Eigen::Ref<const Eigen::MatrixXd>& window) {
  require(window.rows() >= 2, "functional window needs at least 2 rows");
  require(window.allFinite(), "non-finite value in functional input");

  const Eigen::Index n_cols = window.cols();
  Eigen::VectorXd out(kFunctionalCount * n_cols);
  std::vector<double> col(window.rows());
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    for (Eigen::Index r = 0; r < window.rows(); ++r) col[r] = window(r, c);
    std::sort(col.begin(), col.end());

    const double p01 = percentile_sorted(col, 0.01);
    const double p99 = percentile_sorted(col, 0.99);
    const double median = percentile_sorted(col, 0.50);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= col.size();  // population variance

    out[0 * n_cols + c] = p01;
    out[1 * n_cols + c] = p99;
    out[2 * n_cols + c] = p99 - p01;
    out[3 * n_cols + c] = mean;
    out[4 * n_cols + c] = median;
    out[5 * n_cols + c] = std::sqrt(var);
  }
  return out;
}

FrameSequence extract_analysis_frames(const LldSequence& llds, double window_s,
                                      double shift_s, const std::string& source_id) {
  require(window_s > 0 && shift_s > 0, "window and shift must be positive");
  // LLD rows fully inside a window of window_s seconds
  const auto rows_per_window = static_cast<Eigen::Index>(
      std::floor((window_s * 1000.0 - llds.frame_len_ms) / llds.hop_ms) + 1);
  const auto shift_rows = static_cast<Eigen::Index>(std::lround(shift_s * 1000.0 / llds.hop_ms));
  require(shift_rows > 0, "shift smaller than one LLD hop");
  require(llds.frames.rows() >= rows_per_window,
          "session too short: audio does not cover one analysis window");

  const Eigen::Index n_windows = (llds.frames.rows() - rows_per_window) / shift_rows + 1;
  const Eigen::Index dim = kFunctionalCount * llds.frames.cols();

  FrameSequence fs;
  fs.window_s = window_s;
  fs.shift_s = shift_s;
  fs.source_id = source_id;
  fs.values.resize(n_windows, dim);
  for (Eigen::Index w = 0; w < n_windows; ++w) {
    const auto block = llds.frames.middleRows(w * shift_rows, rows_per_window);
    fs.values.row(w) = compute_functionals(block).cast<float>();
  }
  return fs;
}

FrameSequence extract_features(const AudioBuffer& audio, const LldConfig& cfg,
                               double window_s, double shift_s,
                               const std::string& source_id) {
  require(!audio.samples.empty(), "empty audio input");
  const AudioBuffer at16k = resample(audio, kLldSampleRate);
  const LldSequence llds = compute_lld_sequence(at16k, cfg);
  return extract_analysis_frames(llds, window_s, shift_s, source_id);
}

std::vector<std::string> lld_column_names(const LldConfig& cfg) {
  std::vector<std::string> names;
  names.reserve(cfg.n_lld());
  names.emplace_back("pitch");
  names.emplace_back("intensity");
  for (int i = 0; i < cfg.n_mfcc; ++i) names.push_back("mfcc" + std::to_string(i));
  for (int i = 0; i < cfg.n_mfb; ++i) names.push_back("mfb" + std::to_string(i));
  for (int i = 0; i < cfg.n_lpc; ++i) names.push_back("lpc" + std::to_string(i + 1));
  names.emplace_back("jitter");
  names.emplace_back("shimmer");
  const int n_base = cfg.n_base();
  for (int i = 0; i < n_base; ++i) names.push_back(names[i] + "_de");
  return names;
}

std::vector<std::string> feature_column_names(const LldConfig& cfg) {
  static const char* kFunctionals[kFunctionalCount] = {"pct01",  "pct99",  "range",
                                                       "mean",   "median", "stddev"};
  const auto llds = lld_column_names(cfg);
  std::vector<std::string> names;
  names.reserve(kFunctionalCount * llds.size());
  for (const char* f : kFunctionals)
    for (const auto& lld : llds) names.push_back(std::string(f) + "_" + lld);
  return names;
}

}  // namespace bmt
