#include "bmt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "bmt/common.hpp"
#include "bmt/feature_io.hpp"
#include "bmt/io_util.hpp"
#include "bmt/parallel.hpp"
#include "bmt/rng.hpp"

namespace bmt {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double sq_dist(const Eigen::Ref<const Eigen::RowVectorXf>& a,
               const Eigen::Ref<const Eigen::RowVectorXf>& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<LabelRow> read_labels_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty labels file: " + path.string());
  const auto header = split_csv_line(line);
  require(header.size() == 4 && header[0] == "session_id" && header[1] == "group_id" &&
              header[2] == "code" && header[3] == "label",
          "labels file must start with header session_id,group_id,code,label");
  std::vector<LabelRow> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    require(f.size() == 4, "malformed labels row: " + line);
    require(f[3] == "0" || f[3] == "1", "labels must be binary 0/1, got: " + f[3]);
    rows.push_back({f[0], f[1], f[2], f[3] == "1" ? 1 : 0});
  }
  return rows;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<LabelRow>& rows) {
  std::ostringstream os;
  os << "session_id,group_id,code,label\n";
  for (const auto& r : rows)
    os << r.session_id << ',' << r.group_id << ',' << r.code << ',' << r.label << '\n';
  atomic_write_text(path, os.str());
}

std::vector<SessionRecord> load_sessions(const std::filesystem::path& feature_dir,
                                         const std::filesystem::path& labels_csv) {
  const auto rows = read_labels_csv(labels_csv);
  std::map<std::string, std::pair<std::string, std::map<std::string, int>>> meta;
  for (const auto& r : rows) {
    auto& entry = meta[r.session_id];
    if (!entry.first.empty())
      require(entry.first == r.group_id,
              "conflicting group_id for session " + r.session_id);
    entry.first = r.group_id;
    entry.second[r.code] = r.label;
  }

  std::vector<SessionRecord> out;
  for (auto& seq : read_feature_dir(feature_dir)) {
    SessionRecord rec;
    rec.session_id = seq.source_id;
    rec.frames = std::move(seq.values);
    rec.window_s = seq.window_s;
    rec.shift_s = seq.shift_s;
    const auto it = meta.find(rec.session_id);
    if (it != meta.end()) {
      rec.group_id = it->second.first;
      rec.labels = it->second.second;
    } else {
      rec.group_id = rec.session_id;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

int knn_label(const Eigen::Ref<const Eigen::RowVectorXf>& query, const ReferenceSet& refs) {
  require(refs.vectors.rows() > 0, "empty reference set");
  require(refs.vectors.cols() == query.size(), "query/reference dimension mismatch");
  require(static_cast<Eigen::Index>(refs.labels.size()) == refs.vectors.rows(),
          "reference labels do not align with vectors");
  Eigen::Index best = 0;
  double best_d = sq_dist(query, refs.vectors.row(0));
  for (Eigen::Index i = 1; i < refs.vectors.rows(); ++i) {
    const double d = sq_dist(query, refs.vectors.row(i));
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = i;
    }
  }
  return refs.labels[static_cast<std::size_t>(best)];
}

FoldPlan build_fold_plan(const std::vector<SessionRecord>& dataset) {
  std::set<std::string> groups;
  for (const auto& s : dataset) {
    require(!s.group_id.empty(), "session " + s.session_id + " has empty group_id");
    groups.insert(s.group_id);
  }
  FoldPlan plan;
  plan.held_out_groups.assign(groups.begin(), groups.end());
  return plan;
}

std::vector<ClassifyResult> classify_sessions_multi(
    const std::vector<SessionRecord>& dataset, const std::vector<std::string>& codes,
    const FoldPlan& plan, int jobs) {
  require(!dataset.empty(), "empty dataset");
  require(!codes.empty(), "no codes requested");
  for (const auto& s : dataset) {
    for (const auto& code : codes)
      require(s.labels.count(code),
              "session " + s.session_id + " has no label for code " + code);
    require(s.frames.cols() == dataset.front().frames.cols(),
            "sessions have inconsistent frame dimensions");
  }

  const std::size_t n_folds = plan.held_out_groups.size();
  const std::size_t n_codes = codes.size();
  // per fold, per code, predictions in session order
  std::vector<std::vector<std::vector<SessionPrediction>>> per_fold(n_folds);

  parallel_for(n_folds, jobs, [&](std::size_t f) {
    const std::string& held = plan.held_out_groups[f];

    Eigen::Index n_ref = 0;
    for (const auto& s : dataset)
      if (s.group_id != held) n_ref += s.frames.rows();
    require(n_ref > 0, "fold " + held + " has an empty reference set");

    MatrixXfRM ref_vectors(n_ref, dataset.front().frames.cols());
    std::vector<std::vector<int>> ref_labels(n_codes);  // per code, aligned rows
    Eigen::Index at = 0;
    for (const auto& s : dataset) {
      if (s.group_id == held) continue;
      ref_vectors.middleRows(at, s.frames.rows()) = s.frames;
      at += s.frames.rows();
      for (std::size_t c = 0; c < n_codes; ++c)
        ref_labels[c].insert(ref_labels[c].end(),
                             static_cast<std::size_t>(s.frames.rows()),
                             s.labels.at(codes[c]));
    }

    per_fold[f].resize(n_codes);
    for (const auto& s : dataset) {
      if (s.group_id != held) continue;
      std::vector<int> pos_votes(n_codes, 0);
      for (Eigen::Index i = 0; i < s.frames.rows(); ++i) {
        Eigen::Index best = 0;
        double best_d = sq_dist(s.frames.row(i), ref_vectors.row(0));
        for (Eigen::Index r = 1; r < ref_vectors.rows(); ++r) {
          const double d = sq_dist(s.frames.row(i), ref_vectors.row(r));
          if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = r;
          }
        }
        for (std::size_t c = 0; c < n_codes; ++c)
          pos_votes[c] += ref_labels[c][static_cast<std::size_t>(best)];
      }
      for (std::size_t c = 0; c < n_codes; ++c) {
        SessionPrediction pred;
        pred.session_id = s.session_id;
        pred.group_id = s.group_id;
        pred.true_label = s.labels.at(codes[c]);
        pred.total_votes = static_cast<int>(s.frames.rows());
        pred.pos_votes = pos_votes[c];
        // exact tie predicts presence
        pred.predicted = (2 * pred.pos_votes >= pred.total_votes) ? 1 : 0;
        per_fold[f][c].push_back(std::move(pred));
      }
    }
    for (auto& preds : per_fold[f])
      std::sort(preds.begin(), preds.end(),
                [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
  });

  std::vector<ClassifyResult> results(n_codes);
  for (std::size_t c = 0; c < n_codes; ++c) {
    ClassifyResult& result = results[c];
    for (auto& fold : per_fold)
      for (auto& p : fold[c]) result.sessions.push_back(std::move(p));
    require(!result.sessions.empty(), "no labeled sessions to classify");
    int correct = 0;
    for (const auto& p : result.sessions) {
      correct += (p.predicted == p.true_label) ? 1 : 0;
      if (p.true_label == 1)
        (p.predicted == 1 ? result.tp : result.fn)++;
      else
        (p.predicted == 0 ? result.tn : result.fp)++;
    }
    result.accuracy = static_cast<double>(correct) / result.sessions.size();
  }
  return results;
}

ClassifyResult classify_sessions(const std::vector<SessionRecord>& dataset,
                                 const std::string& code, const FoldPlan& plan,
                                 int jobs) {
  return classify_sessions_multi(dataset, {code}, plan, jobs).front();
}

std::vector<double> trajectory_scores(const MatrixXfRM& query_frames,
                                      const ReferenceSet& refs, int top_n, int jobs) {
  require(top_n >= 1, "top_n must be >= 1");
  require(refs.vectors.rows() >= top_n,
          "reference set smaller than top_n (" + std::to_string(refs.vectors.rows()) +
              " < " + std::to_string(top_n) + ")");
  require(static_cast<Eigen::Index>(refs.labels.size()) == refs.vectors.rows(),
          "reference labels do not align with vectors");

  std::vector<double> scores(static_cast<std::size_t>(query_frames.rows()), 0.0);
  parallel_for(static_cast<std::size_t>(query_frames.rows()), jobs, [&](std::size_t q) {
    std::vector<std::pair<double, Eigen::Index>> dist;
    dist.reserve(static_cast<std::size_t>(refs.vectors.rows()));
    for (Eigen::Index i = 0; i < refs.vectors.rows(); ++i)
      dist.emplace_back(sq_dist(query_frames.row(static_cast<Eigen::Index>(q)),
                                refs.vectors.row(i)),
                        i);
    std::nth_element(dist.begin(), dist.begin() + (top_n - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + top_n);  // deterministic tie order by index
    int pos = 0;
    for (int i = 0; i < top_n; ++i)
      pos += refs.labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)];
    scores[q] = static_cast<double>(pos) / top_n;
  });
  return scores;
}

Eigen::MatrixXd similarity_confusion(const std::vector<MatrixXfRM>& files, int jobs) {
  const auto n_files = files.size();
  require(n_files >= 2, "similarity confusion requires >= 2 files");
  for (std::size_t i = 0; i < n_files; ++i)
    require(files[i].rows() > 0, "file " + std::to_string(i) + " has no frames");

  Eigen::MatrixXd matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_files),
                                                 static_cast<Eigen::Index>(n_files));
  parallel_for(n_files, jobs, [&](std::size_t qi) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_files));
    for (Eigen::Index q = 0; q < files[qi].rows(); ++q) {
      double best_d = std::numeric_limits<double>::infinity();
      std::size_t best_file = 0;
      for (std::size_t ri = 0; ri < n_files; ++ri) {
        if (ri == qi) continue;  // own-file frames excluded
        for (Eigen::Index r = 0; r < files[ri].rows(); ++r) {
          const double d = sq_dist(files[qi].row(q), files[ri].row(r));
          if (d < best_d) {
            best_d = d;
            best_file = ri;
          }
        }
      }
      counts[static_cast<Eigen::Index>(best_file)] += 1.0;
    }
    matrix.row(static_cast<Eigen::Index>(qi)) =
        counts.transpose() / static_cast<double>(files[qi].rows());
  });
  return matrix;
}

std::vector<SessionRecord> select_balanced(const std::vector<SessionRecord>& dataset,
                                           const std::string& code, int per_class,
                                           std::uint64_t seed) {
  require(per_class >= 1, "per_class must be >= 1");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto it = dataset[i].labels.find(code);
    if (it == dataset[i].labels.end()) continue;
    (it->second == 1 ? pos : neg).push_back(i);
  }
  require(static_cast<int>(pos.size()) >= per_class &&
              static_cast<int>(neg.size()) >= per_class,
          "not enough labeled sessions for a balanced " + std::to_string(per_class) +
              "/" + std::to_string(per_class) + " subset of code " + code);
  Rng rng(derive_stream_seed(seed, "balance:" + code));
  auto chosen_pos = rng.sample_without_replacement(pos, static_cast<std::size_t>(per_class));
  auto chosen_neg = rng.sample_without_replacement(neg, static_cast<std::size_t>(per_class));
  std::vector<std::size_t> all;
  all.insert(all.end(), chosen_pos.begin(), chosen_pos.end());
  all.insert(all.end(), chosen_neg.begin(), chosen_neg.end());
  std::sort(all.begin(), all.end());
  std::vector<SessionRecord> out;
  out.reserve(all.size());
  for (std::size_t i : all) out.push_back(dataset[i]);
  return out;
}

}  // namespace bmt
