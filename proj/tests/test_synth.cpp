#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "bmt/common.hpp"
#include "bmt/evaluation.hpp"
#include "bmt/features.hpp"
#include "bmt/synth.hpp"

using namespace bmt;

namespace {

// frame-level 1-NN state accuracy with own-file frames excluded
double cross_file_state_accuracy(const SynthCorpus& corpus) {
  int correct = 0, total = 0;
  for (std::size_t qf = 0; qf < corpus.files.size(); ++qf) {
    ReferenceSet refs;
    Eigen::Index n_ref = 0;
    for (std::size_t rf = 0; rf < corpus.files.size(); ++rf)
      if (rf != qf) n_ref += corpus.files[rf].values.rows();
    refs.vectors.resize(n_ref, corpus.files[qf].values.cols());
    Eigen::Index at = 0;
    for (std::size_t rf = 0; rf < corpus.files.size(); ++rf) {
      if (rf == qf) continue;
      refs.vectors.middleRows(at, corpus.files[rf].values.rows()) =
          corpus.files[rf].values;
      at += corpus.files[rf].values.rows();
      for (int st : corpus.frame_states[rf]) refs.labels.push_back(st);
    }
    for (Eigen::Index i = 0; i < corpus.files[qf].values.rows(); ++i) {
      const int predicted = knn_label(corpus.files[qf].values.row(i), refs);
      correct += (predicted == corpus.frame_states[qf][static_cast<std::size_t>(i)]);
      ++total;
    }
  }
  return static_cast<double>(correct) / total;
}

}  // namespace

TEST_CASE("noiseless corpus repeats the state vector within a segment") {
  SynthConfig cfg;
  cfg.n_files = 3;
  cfg.file_duration_s = 90.0;
  cfg.nuisance_strength = 0.0;
  cfg.noise_sigma = 0.0;
  cfg.seed = 11;
  const auto corpus = generate(cfg);

  int equal_pairs = 0, same_state_pairs = 0;
  for (std::size_t f = 0; f < corpus.files.size(); ++f) {
    const auto& v = corpus.files[f].values;
    const auto& st = corpus.frame_states[f];
    std::map<int, Eigen::RowVectorXf> pure;  // state -> canonical pure frame
    for (Eigen::Index i = 0; i + 1 < v.rows(); ++i) {
      if (st[static_cast<std::size_t>(i)] != st[static_cast<std::size_t>(i + 1)]) continue;
      ++same_state_pairs;
      if ((v.row(i) - v.row(i + 1)).cwiseAbs().maxCoeff() == 0.0f) ++equal_pairs;
    }
    // frames from different states never coincide
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      auto [it, fresh] = pure.try_emplace(st[static_cast<std::size_t>(i)], v.row(i));
      if (!fresh && (v.row(i) - it->second).cwiseAbs().maxCoeff() == 0.0f) continue;
    }
  }
  REQUIRE(same_state_pairs > 0);
  // windows fully inside a segment dominate at 45 s dwell
  CHECK(static_cast<double>(equal_pairs) / same_state_pairs > 0.5);
}

TEST_CASE("generation is deterministic for a fixed seed") {
  SynthConfig cfg;
  cfg.n_files = 4;
  cfg.file_duration_s = 60.0;
  cfg.seed = 21;
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t f = 0; f < a.files.size(); ++f) {
    CHECK((a.files[f].values - b.files[f].values).cwiseAbs().maxCoeff() == 0.0f);
    CHECK(a.frame_states[f] == b.frame_states[f]);
  }
  CHECK(a.stationarity_prob == b.stationarity_prob);

  cfg.seed = 22;
  const auto c = generate(cfg);
  CHECK((a.files[0].values - c.files[0].values).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("nuisance at full strength degrades raw cross-file accuracy by 15 points") {
  SynthConfig clean;
  clean.n_files = 6;
  clean.file_duration_s = 80.0;
  clean.behavior_dwell_s = 40.0;
  clean.n_states = 4;
  clean.nuisance_strength = 0.0;
  clean.noise_sigma = 0.35;
  clean.seed = 31;

  SynthConfig confounded = clean;
  confounded.nuisance_strength = 1.0;

  const double acc_clean = cross_file_state_accuracy(generate(clean));
  const double acc_conf = cross_file_state_accuracy(generate(confounded));
  CHECK(acc_clean - acc_conf >= 0.15);
}

TEST_CASE("stationarity holds by construction at the default dwell") {
  SynthConfig cfg;
  cfg.n_files = 8;
  cfg.file_duration_s = 100.0;
  cfg.seed = 41;
  const auto corpus = generate(cfg);
  CHECK(corpus.stationarity_prob >= 0.85);
}

TEST_CASE("labels binarize the extremes: balanced thirds per state code") {
  SynthConfig cfg;
  cfg.n_files = 12;
  cfg.file_duration_s = 70.0;
  cfg.seed = 51;
  const auto corpus = generate(cfg);
  // top third labeled 1, bottom third 0, middle left out
  std::map<std::string, std::pair<int, int>> counts;  // code -> (pos, total)
  for (const auto& row : corpus.labels) {
    counts[row.code].first += row.label;
    counts[row.code].second += 1;
  }
  REQUIRE(counts.size() == 4);
  for (const auto& [code, c] : counts) {
    CHECK(c.first == cfg.n_files / 3);
    CHECK(c.second == 2 * (cfg.n_files / 3));
  }
  // labeled extremes really are extreme: every positive file's share exceeds
  // every negative file's share for that code
  for (int s = 0; s < cfg.n_states; ++s) {
    const std::string code = "state" + std::to_string(s);
    double min_pos = 1.0, max_neg = 0.0;
    for (const auto& row : corpus.labels) {
      if (row.code != code) continue;
      const int f = std::stoi(row.session_id.substr(5));
      const double share =
          corpus.state_fractions[static_cast<std::size_t>(f)][static_cast<std::size_t>(s)];
      if (row.label == 1)
        min_pos = std::min(min_pos, share);
      else
        max_neg = std::max(max_neg, share);
    }
    CHECK(min_pos >= max_neg);
  }
}

TEST_CASE("dominant states concentrate the dwell share") {
  SynthConfig cfg;
  cfg.n_files = 10;
  cfg.file_duration_s = 200.0;
  cfg.seed = 52;
  const auto corpus = generate(cfg);
  int concentrated = 0;
  for (const auto& fr : corpus.state_fractions) {
    const double top = *std::max_element(fr.begin(), fr.end());
    if (top >= 0.4) ++concentrated;
  }
  CHECK(concentrated >= 7);  // most files lean clearly toward one state
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.n_states = 1;
  CHECK_THROWS_AS(generate(cfg), InputError);
  cfg = SynthConfig{};
  cfg.behavior_dwell_s = 10.0;  // below the analysis window
  CHECK_THROWS_AS(generate(cfg), InputError);
  cfg = SynthConfig{};
  cfg.nuisance_strength = 1.5;
  CHECK_THROWS_AS(generate(cfg), InputError);
}

TEST_CASE("audio mode produces distinguishable tones end to end") {
  SynthConfig cfg;
  cfg.n_files = 2;
  cfg.file_duration_s = 30.0;
  cfg.behavior_dwell_s = 26.0;
  cfg.n_states = 2;
  cfg.nuisance_strength = 0.3;
  cfg.seed = 61;
  const auto corpus = generate_audio(cfg);
  REQUIRE(corpus.audio.size() == 2);
  REQUIRE(corpus.frame_states.size() == 2);
  CHECK(corpus.frame_states[0].size() == 11);  // floor((30-20)/1)+1

  const auto features =
      extract_features(corpus.audio[0], LldConfig{}, cfg.window_s, cfg.shift_s, "a0");
  CHECK(features.dim() == 420);
  CHECK(features.size() == 11);
  // mean-pitch functional sits in the tone range for a voiced file
  const double mean_pitch = features.values(0, 3 * 70 + 0);
  CHECK(mean_pitch > 100.0);
  CHECK(mean_pitch < 340.0);
}
