#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "bmt/features.hpp"
#include "bmt/model.hpp"
#include "bmt/sampling.hpp"

namespace bmt {

struct Checkpoint {
  NetworkParams params;
  Eigen::VectorXd mean;   // per-dim normalization from the training corpus
  Eigen::VectorXd stdev;  // dims with zero spread are stored as 1
  TrainConfig config;
  int best_epoch = 0;                 // 0 = initial (untrained) parameters
  std::vector<double> train_history;  // mean per-tuple batch loss, one per epoch
  std::vector<double> val_history;    // [0] = before training, then one per epoch
};

// Normalized copy of the frames for model input (float storage -> double math).
Eigen::MatrixXd normalize_frames(const FrameSequence& seq, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& stdev);

// Normalize with checkpoint stats, run the encoder, return float embeddings.
MatrixXfRM embed_frames(const Checkpoint& ckpt, const FrameSequence& seq);

// Sum of the variant loss over all tuples plus one lambda penalty term.
LossBreakdown evaluate_loss(const NetworkParams& params,
                            const std::map<std::string, Eigen::MatrixXd>& store,
                            const std::vector<TripletTuple>& tuples,
                            const TrainConfig& cfg);

// Minimizes the variant objective with Adam + step decay; keeps the
// parameters with the lowest validation loss, stopping once
// epoch - best_epoch >= patience. Train and validation tuples must reference
// disjoint source files. Deterministic for a fixed (corpus, tuples, cfg).
Checkpoint train(const std::vector<FrameSequence>& corpus,
                 const std::vector<TripletTuple>& train_tuples,
                 const std::vector<TripletTuple>& val_tuples, const TrainConfig& cfg,
                 Variant variant, std::ostream* log = nullptr,
                 const std::vector<int>& dims = NetworkParams::default_dims());

// Versioned binary container ("BMC1"), f64 parameters, bit-exact round trip.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bmt
