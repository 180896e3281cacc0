#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bmt/features.hpp"

namespace bmt {

// A session's frames (raw features or embeddings) with optional binary labels
// per behavior code. group_id drives fold exclusion (couple/speaker identity).
struct SessionRecord {
  std::string session_id;
  std::string group_id;
  MatrixXfRM frames;
  double window_s = 20.0;
  double shift_s = 1.0;
  std::map<std::string, int> labels;
};

struct LabelRow {
  std::string session_id;
  std::string group_id;
  std::string code;
  int label = 0;
};

std::vector<LabelRow> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabelRow>& rows);

// Feature/embedding files joined with labels; sessions without label rows get
// empty label maps (usable as unlabeled queries).
std::vector<SessionRecord> load_sessions(const std::filesystem::path& feature_dir,
                                         const std::filesystem::path& labels_csv);

struct ReferenceSet {
  MatrixXfRM vectors;
  std::vector<int> labels;
};

// Label of the Euclidean-nearest reference (exhaustive scan, double-precision
// accumulation); ties break toward the lowest reference index.
int knn_label(const Eigen::Ref<const Eigen::RowVectorXf>& query, const ReferenceSet& refs);

// Leave-one-group-out: every group held out exactly once, sorted order.
struct FoldPlan {
  std::vector<std::string> held_out_groups;
};

FoldPlan build_fold_plan(const std::vector<SessionRecord>& dataset);

struct SessionPrediction {
  std::string session_id;
  std::string group_id;
  int true_label = 0;
  int predicted = 0;
  int pos_votes = 0;
  int total_votes = 0;
};

struct ClassifyResult {
  std::vector<SessionPrediction> sessions;  // ordered by (fold, session_id)
  double accuracy = 0.0;
  int tp = 0, tn = 0, fp = 0, fn = 0;
};

// Frame-level 1-NN against all labeled frames outside the held-out group,
// then per-session majority vote (exact tie predicts 1).
ClassifyResult classify_sessions(const std::vector<SessionRecord>& dataset,
                                 const std::string& code, const FoldPlan& plan,
                                 int jobs = 1);

// Same protocol for several codes at once. The nearest reference frame does
// not depend on the code, so the distance scan is shared; requires every
// session to be labeled for every requested code. Results align with
// per-code classify_sessions calls exactly.
std::vector<ClassifyResult> classify_sessions_multi(
    const std::vector<SessionRecord>& dataset, const std::vector<std::string>& codes,
    const FoldPlan& plan, int jobs = 1);

// Per-frame fraction of positive labels among the top_n nearest references.
std::vector<double> trajectory_scores(const MatrixXfRM& query_frames,
                                      const ReferenceSet& refs, int top_n, int jobs = 1);

// Row-stochastic cross-file nearest-neighbor matrix: entry (i, j) is the
// fraction of file i's frames whose nearest frame outside file i lies in j.
Eigen::MatrixXd similarity_confusion(const std::vector<MatrixXfRM>& files, int jobs = 1);

// Seeded balanced subset: per_class sessions labeled 1 and 0 for `code`.
std::vector<SessionRecord> select_balanced(const std::vector<SessionRecord>& dataset,
                                           const std::string& code, int per_class,
                                           std::uint64_t seed);

}  // namespace bmt
