#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "bmt/evaluation.hpp"
#include "bmt/io_util.hpp"
#include "bmt/rng.hpp"
#include "bmt/synth.hpp"

using namespace bmt;
namespace fs = std::filesystem;

namespace {

MatrixXfRM random_frames(int n, int dim, std::uint64_t seed, float offset = 0.0f) {
  Rng rng(seed);
  MatrixXfRM m(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d)
      m(i, d) = static_cast<float>(rng.gaussian()) + offset;
  return m;
}

// independent exhaustive-scan oracle with the same lowest-index tie rule
int knn_oracle(const Eigen::RowVectorXf& q, const MatrixXfRM& refs,
               const std::vector<int>& labels) {
  int best = 0;
  double best_d = -1.0;
  for (Eigen::Index r = 0; r < refs.rows(); ++r) {
    double d = 0.0;
    for (Eigen::Index c = 0; c < refs.cols(); ++c) {
      const double diff = double(q[c]) - double(refs(r, c));
      d += diff * diff;
    }
    if (best_d < 0.0 || d < best_d) {
      best_d = d;
      best = static_cast<int>(r);
    }
  }
  return labels[static_cast<std::size_t>(best)];
}

SessionRecord make_session(const std::string& id, const std::string& group,
                           MatrixXfRM frames, std::map<std::string, int> labels) {
  SessionRecord s;
  s.session_id = id;
  s.group_id = group;
  s.frames = std::move(frames);
  s.labels = std::move(labels);
  return s;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("1-NN basics: exact match and simple geometry") {
  ReferenceSet refs;
  refs.vectors.resize(2, 2);
  refs.vectors << 0.f, 0.f, 10.f, 10.f;
  refs.labels = {0, 1};

  Eigen::RowVectorXf q(2);
  q << 1.f, 1.f;
  CHECK(knn_label(q, refs) == 0);
  q << 10.f, 10.f;
  CHECK(knn_label(q, refs) == 1);  // zero distance wins

  refs.vectors << 3.f, 3.f, 3.f, 3.f;  // exact tie -> lowest index
  refs.labels = {1, 0};
  q << 0.f, 0.f;
  CHECK(knn_label(q, refs) == 1);

  ReferenceSet empty;
  CHECK_THROWS_AS(knn_label(q, empty), InputError);
}

TEST_CASE("1-NN agrees with the exhaustive-scan oracle on 1000 queries") {
  ReferenceSet refs;
  refs.vectors = random_frames(200, 8, 1);
  Rng lab(2);
  for (int i = 0; i < 200; ++i) refs.labels.push_back(static_cast<int>(lab.below(2)));

  const auto queries = random_frames(1000, 8, 3);
  int agree = 0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const Eigen::RowVectorXf q = queries.row(i);
    if (knn_label(q, refs) == knn_oracle(q, refs.vectors, refs.labels)) ++agree;
  }
  CHECK(agree == 1000);
}

TEST_CASE("fold plan holds out every group exactly once") {
  std::vector<SessionRecord> data;
  data.push_back(make_session("s1", "g1", random_frames(3, 2, 1), {{"c", 0}}));
  data.push_back(make_session("s2", "g1", random_frames(3, 2, 2), {{"c", 1}}));
  data.push_back(make_session("s3", "g2", random_frames(3, 2, 3), {{"c", 0}}));
  data.push_back(make_session("s4", "g3", random_frames(3, 2, 4), {{"c", 1}}));
  const auto plan = build_fold_plan(data);
  CHECK(plan.held_out_groups == std::vector<std::string>{"g1", "g2", "g3"});
}

TEST_CASE("classification never references the held-out group") {
  // same-group sessions are exact duplicates labeled 1; other groups are far
  // away and labeled 0. Any leakage would match the zero-distance twin.
  std::vector<SessionRecord> data;
  const auto twin = random_frames(4, 3, 10);
  data.push_back(make_session("a1", "ga", twin, {{"c", 1}}));
  data.push_back(make_session("a2", "ga", twin, {{"c", 1}}));
  data.push_back(make_session("b1", "gb", random_frames(4, 3, 11, 50.f), {{"c", 0}}));
  data.push_back(make_session("b2", "gb", random_frames(4, 3, 12, 50.f), {{"c", 0}}));
  data.push_back(make_session("c1", "gc", random_frames(4, 3, 13, -50.f), {{"c", 0}}));

  const auto result = classify_sessions(data, "c", build_fold_plan(data));
  for (const auto& p : result.sessions)
    if (p.group_id == "ga") {
      CHECK(p.predicted == 0);
      CHECK(p.pos_votes == 0);
    }
}

TEST_CASE("all-positive references force positive predictions") {
  std::vector<SessionRecord> data;
  data.push_back(make_session("s1", "g1", random_frames(5, 2, 21), {{"c", 1}}));
  data.push_back(make_session("s2", "g2", random_frames(5, 2, 22), {{"c", 1}}));
  data.push_back(make_session("s3", "g3", random_frames(5, 2, 23), {{"c", 0}}));
  // labels of references are all 1 except s3's own frames, which never serve
  // its own fold; for s3's fold the references are s1+s2, all labeled 1
  const auto result = classify_sessions(data, "c", build_fold_plan(data));
  for (const auto& p : result.sessions) CHECK(p.predicted == 1);
  // accuracy equals the base rate of label 1
  CHECK(result.accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("multi-code classification matches per-code calls exactly") {
  std::vector<SessionRecord> data;
  for (int i = 0; i < 6; ++i)
    data.push_back(make_session("s" + std::to_string(i), "g" + std::to_string(i),
                                random_frames(8, 4, 30 + static_cast<std::uint64_t>(i)),
                                {{"c1", i % 2}, {"c2", (i / 2) % 2}}));
  const auto plan = build_fold_plan(data);
  const auto multi = classify_sessions_multi(data, {"c1", "c2"}, plan, 2);
  const auto one1 = classify_sessions(data, "c1", plan);
  const auto one2 = classify_sessions(data, "c2", plan);
  REQUIRE(multi.size() == 2);
  CHECK(multi[0].accuracy == one1.accuracy);
  CHECK(multi[1].accuracy == one2.accuracy);
  for (std::size_t i = 0; i < one1.sessions.size(); ++i) {
    CHECK(multi[0].sessions[i].predicted == one1.sessions[i].predicted);
    CHECK(multi[0].sessions[i].pos_votes == one1.sessions[i].pos_votes);
    CHECK(multi[1].sessions[i].predicted == one2.sessions[i].predicted);
  }
}

TEST_CASE("separable synthetic corpus classifies above 0.9") {
  SynthConfig cfg;
  cfg.n_files = 10;
  cfg.file_duration_s = 70.0;
  cfg.behavior_dwell_s = 35.0;
  cfg.n_states = 3;
  cfg.nuisance_strength = 0.0;
  cfg.noise_sigma = 0.05;
  cfg.seed = 77;
  const auto corpus = generate(cfg);

  std::vector<SessionRecord> data;
  for (std::size_t f = 0; f < corpus.files.size(); ++f) {
    SessionRecord s;
    s.session_id = s.group_id = corpus.files[f].source_id;
    s.frames = corpus.files[f].values;
    for (const auto& row : corpus.labels)
      if (row.session_id == s.session_id) s.labels[row.code] = row.label;
    data.push_back(std::move(s));
  }
  // labels cover the extremes only, so evaluate each code on its own subset
  double acc = 0.0;
  for (int st = 0; st < cfg.n_states; ++st) {
    const std::string code = "state" + std::to_string(st);
    std::vector<SessionRecord> labeled;
    for (const auto& s : data)
      if (s.labels.count(code)) labeled.push_back(s);
    acc += classify_sessions(labeled, code, build_fold_plan(labeled)).accuracy;
  }
  acc /= static_cast<double>(cfg.n_states);
  CHECK(acc >= 0.9);
}

TEST_CASE("trajectory: degenerate reference labelings") {
  ReferenceSet refs;
  refs.vectors = random_frames(80, 4, 41);
  refs.labels.assign(80, 1);
  const auto queries = random_frames(10, 4, 42);

  const auto ones = trajectory_scores(queries, refs, 60);
  for (double v : ones) CHECK(v == 1.0);

  Rng lab(43);
  int pos = 0;
  for (auto& l : refs.labels) {
    l = static_cast<int>(lab.below(2));
    pos += l;
  }
  // N = |refs| selects every reference
  const auto full = trajectory_scores(queries, refs, 80);
  for (double v : full) CHECK(v == doctest::Approx(pos / 80.0));

  const auto some = trajectory_scores(queries, refs, 60);
  for (double v : some) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(trajectory_scores(queries, refs, 81), InputError);
}

TEST_CASE("flipping a reference label 0->1 never decreases any score") {
  ReferenceSet refs;
  refs.vectors = random_frames(100, 3, 51);
  Rng lab(52);
  for (int i = 0; i < 100; ++i) refs.labels.push_back(static_cast<int>(lab.below(2)));
  const auto queries = random_frames(25, 3, 53);
  const auto before = trajectory_scores(queries, refs, 20);

  Rng pick(54);
  for (int flip = 0; flip < 5; ++flip) {
    auto idx = pick.below(100);
    while (refs.labels[idx] == 1) idx = pick.below(100);
    auto flipped = refs;
    flipped.labels[idx] = 1;
    const auto after = trajectory_scores(queries, flipped, 20);
    for (std::size_t q = 0; q < before.size(); ++q) CHECK(after[q] >= before[q]);
  }
}

TEST_CASE("trajectory follows the latent state on a separable corpus") {
  SynthConfig cfg;
  cfg.n_files = 6;
  cfg.file_duration_s = 120.0;
  cfg.behavior_dwell_s = 30.0;
  cfg.n_states = 2;
  cfg.nuisance_strength = 0.2;
  cfg.noise_sigma = 0.15;
  cfg.seed = 99;
  const auto corpus = generate(cfg);

  // query file must visit both states for a correlation to exist
  std::size_t query = corpus.files.size();
  for (std::size_t f = 0; f < corpus.files.size(); ++f) {
    double mean = 0.0;
    for (int st : corpus.frame_states[f]) mean += (st == 1);
    mean /= static_cast<double>(corpus.frame_states[f].size());
    if (mean > 0.05 && mean < 0.95) {
      query = f;
      break;
    }
  }
  REQUIRE(query < corpus.files.size());

  // frame-level reference labels from the ground truth of the other files
  ReferenceSet refs;
  Eigen::Index n_ref = 0;
  for (std::size_t f = 0; f < corpus.files.size(); ++f)
    if (f != query) n_ref += corpus.files[f].values.rows();
  refs.vectors.resize(n_ref, corpus.files[query].values.cols());
  Eigen::Index at = 0;
  for (std::size_t f = 0; f < corpus.files.size(); ++f) {
    if (f == query) continue;
    refs.vectors.middleRows(at, corpus.files[f].values.rows()) = corpus.files[f].values;
    at += corpus.files[f].values.rows();
    for (int st : corpus.frame_states[f]) refs.labels.push_back(st == 1 ? 1 : 0);
  }

  const auto scores = trajectory_scores(corpus.files[query].values, refs, 60);
  std::vector<double> truth;
  for (int st : corpus.frame_states[query]) truth.push_back(st == 1 ? 1.0 : 0.0);
  CHECK(pearson(scores, truth) >= 0.7);
}

TEST_CASE("confusion matrix: identical files force cross matches") {
  const auto a = random_frames(12, 3, 61);
  const auto m = similarity_confusion({a, a});
  CHECK(m(0, 0) == 0.0);
  CHECK(m(0, 1) == 1.0);
  CHECK(m(1, 0) == 1.0);
  CHECK(m(1, 1) == 0.0);
}

TEST_CASE("confusion rows are stochastic and scale-invariant") {
  std::vector<MatrixXfRM> files = {random_frames(20, 4, 71), random_frames(15, 4, 72),
                                   random_frames(25, 4, 73)};
  const auto m = similarity_confusion(files);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    CHECK(std::abs(m.row(i).sum() - 1.0) <= 1e-9);
    CHECK(m(i, i) == 0.0);
  }
  auto scaled = files;
  for (auto& f : scaled) f *= 3.7f;
  const auto ms = similarity_confusion(scaled);
  CHECK((m - ms).cwiseAbs().maxCoeff() == 0.0);

  std::vector<MatrixXfRM> with_empty = {random_frames(5, 4, 74), MatrixXfRM(0, 4)};
  CHECK_THROWS_AS(similarity_confusion(with_empty), InputError);
}

TEST_CASE("confusion groups files generated from the same source") {
  // two files from generator A (clustered at +5), one from generator B (-5)
  std::vector<MatrixXfRM> files = {random_frames(15, 6, 81, 5.f),
                                   random_frames(15, 6, 82, 5.f),
                                   random_frames(15, 6, 83, -5.f)};
  const auto m = similarity_confusion(files);
  CHECK(m(0, 1) > m(0, 2));
  CHECK(m(1, 0) > m(1, 2));
}

TEST_CASE("labels csv round trip and session loading errors") {
  const auto dir = fs::temp_directory_path() / "bmt_test_eval";
  fs::create_directories(dir);
  std::vector<LabelRow> rows = {{"s1", "g1", "blame", 1}, {"s1", "g1", "humor", 0},
                                {"s2", "g2", "blame", 0}};
  write_labels_csv(dir / "labels.csv", rows);
  const auto back = read_labels_csv(dir / "labels.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[0].session_id == "s1");
  CHECK(back[0].code == "blame");
  CHECK(back[0].label == 1);

  atomic_write_text(dir / "bad.csv", "wrong,header\n1,2\n");
  CHECK_THROWS_AS(read_labels_csv(dir / "bad.csv"), InputError);
}

TEST_CASE("balanced selection is deterministic and balanced") {
  std::vector<SessionRecord> data;
  for (int i = 0; i < 20; ++i)
    data.push_back(make_session("s" + std::to_string(i), "g" + std::to_string(i),
                                random_frames(2, 2, 90 + static_cast<std::uint64_t>(i)),
                                {{"c", i < 12 ? 1 : 0}}));
  const auto a = select_balanced(data, "c", 6, 7);
  const auto b = select_balanced(data, "c", 6, 7);
  REQUIRE(a.size() == 12);
  int pos = 0;
  for (const auto& s : a) pos += s.labels.at("c");
  CHECK(pos == 6);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].session_id == b[i].session_id);
  CHECK_THROWS_AS(select_balanced(data, "c", 9, 7), InputError);
}
