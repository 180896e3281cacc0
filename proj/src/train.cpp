#include "bmt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "bmt/common.hpp"

namespace bmt {

namespace {

std::set<std::string> tuple_sources(const std::vector<TripletTuple>& tuples) {
  std::set<std::string> ids;
  for (const auto& t : tuples) {
    ids.insert(t.source_a);
    ids.insert(t.source_b);
  }
  return ids;
}

// Gathers one batch of normalized rows. DCN only reads xa/xp, but building
// all four keeps the path identical across variants.
TupleBatch gather_batch(const std::map<std::string, Eigen::MatrixXd>& store,
                        const std::vector<TripletTuple>& tuples,
                        const std::vector<std::size_t>& order, std::size_t first,
                        std::size_t count) {
  const auto dim = store.begin()->second.cols();
  TupleBatch batch;
  batch.xa.resize(count, dim);
  batch.xp.resize(count, dim);
  batch.xn.resize(count, dim);
  batch.xnp.resize(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    const TripletTuple& t = tuples[order[first + i]];
    const auto ita = store.find(t.source_a);
    const auto itb = store.find(t.source_b);
    require(ita != store.end(), "tuple references unknown source: " + t.source_a);
    require(itb != store.end(), "tuple references unknown source: " + t.source_b);
    const auto& fa = ita->second;
    const auto& fb = itb->second;
    require(t.anchor >= 0 && t.anchor < fa.rows() && t.positive >= 0 &&
                t.positive < fa.rows(),
            "tuple index out of range for source " + t.source_a);
    require(t.negative >= 0 && t.negative < fb.rows() && t.negative_pair >= 0 &&
                t.negative_pair < fb.rows(),
            "tuple index out of range for source " + t.source_b);
    batch.xa.row(i) = fa.row(t.anchor);
    batch.xp.row(i) = fa.row(t.positive);
    batch.xn.row(i) = fb.row(t.negative);
    batch.xnp.row(i) = fb.row(t.negative_pair);
  }
  return batch;
}

}  // namespace

Eigen::MatrixXd normalize_frames(const FrameSequence& seq, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& stdev) {
  require(seq.values.cols() == mean.size() && mean.size() == stdev.size(),
          "normalization stats do not match feature dim");
  Eigen::MatrixXd out = seq.values.cast<double>();
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= stdev.transpose().array();
  return out;
}

MatrixXfRM embed_frames(const Checkpoint& ckpt, const FrameSequence& seq) {
  const Eigen::MatrixXd x = normalize_frames(seq, ckpt.mean, ckpt.stdev);
  return encode(ckpt.params, x).cast<float>();
}

LossBreakdown evaluate_loss(const NetworkParams& params,
                            const std::map<std::string, Eigen::MatrixXd>& store,
                            const std::vector<TripletTuple>& tuples,
                            const TrainConfig& cfg) {
  LossBreakdown acc;
  std::vector<std::size_t> order(tuples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t chunk = 512;
  for (std::size_t first = 0; first < tuples.size(); first += chunk) {
    const std::size_t count = std::min(chunk, tuples.size() - first);
    const TupleBatch batch = gather_batch(store, tuples, order, first, count);
    const LossBreakdown part = total_loss(params, batch, cfg);
    acc.recon += part.recon;
    acc.triplet += part.triplet;
  }
  acc.l2 = cfg.lambda * l2_weight_penalty(params);
  return acc;
}

Checkpoint train(const std::vector<FrameSequence>& corpus,
                 const std::vector<TripletTuple>& train_tuples,
                 const std::vector<TripletTuple>& val_tuples, const TrainConfig& cfg,
                 Variant variant, std::ostream* log, const std::vector<int>& dims) {
  require(!train_tuples.empty(), "empty tuple set");
  require(!val_tuples.empty(), "empty validation tuple set");
  require(cfg.batch_size >= 1 && cfg.max_epochs >= 1, "invalid train config");
  require(cfg.patience >= 0 && cfg.margin >= 0 && cfg.lambda >= 0, "invalid train config");

  const auto train_ids = tuple_sources(train_tuples);
  const auto val_ids = tuple_sources(val_tuples);
  for (const auto& id : val_ids)
    require(!train_ids.count(id),
            "train/validation source files must be disjoint (shared: " + id + ")");

  std::map<std::string, const FrameSequence*> by_id;
  for (const auto& seq : corpus) by_id[seq.source_id] = &seq;

  // normalization stats over all frames of the training sources
  const auto dim = static_cast<Eigen::Index>(dims.front());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  std::size_t n_rows = 0;
  for (const auto& id : train_ids) {
    const auto it = by_id.find(id);
    require(it != by_id.end(), "tuple references unknown source: " + id);
    const auto& v = it->second->values;
    require(v.cols() == dim, "feature dim does not match network input dim");
    mean += v.cast<double>().colwise().sum().transpose();
    sq += v.cast<double>().array().square().colwise().sum().matrix().transpose();
    n_rows += static_cast<std::size_t>(v.rows());
  }
  require(n_rows > 0, "training corpus has no frames");
  mean /= static_cast<double>(n_rows);
  Eigen::VectorXd stdev =
      (sq / static_cast<double>(n_rows) - mean.array().square().matrix())
          .cwiseMax(0.0)
          .cwiseSqrt();
  for (Eigen::Index i = 0; i < stdev.size(); ++i)
    if (stdev[i] < 1e-8) stdev[i] = 1.0;  // constant columns pass through

  std::map<std::string, Eigen::MatrixXd> store;
  for (const auto& id : train_ids) store[id] = normalize_frames(*by_id.at(id), mean, stdev);
  for (const auto& id : val_ids) {
    const auto it = by_id.find(id);
    require(it != by_id.end(), "tuple references unknown source: " + id);
    require(it->second->values.cols() == dim, "feature dim does not match network input dim");
    store[id] = normalize_frames(*it->second, mean, stdev);
  }

  Rng init_rng(splitmix64(cfg.seed));
  NetworkParams params = NetworkParams::create(variant, dims, init_rng);
  AdamState adam = AdamState::init(params);
  Gradients grads = Gradients::zeros_like(params);

  Checkpoint best;
  best.params = params;
  best.mean = mean;
  best.stdev = stdev;
  best.config = cfg;
  best.best_epoch = 0;

  const double val0 = evaluate_loss(params, store, val_tuples, cfg).total() /
                      static_cast<double>(val_tuples.size());
  require(std::isfinite(val0), "non-finite loss on initial validation pass");
  best.val_history.push_back(val0);
  double best_val = val0;
  if (log) *log << "epoch 0 (init): val_loss=" << val0 << '\n';

  std::vector<std::size_t> order(train_tuples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = lr_for_epoch(cfg, epoch - 1);
    Rng shuffle_rng(derive_stream_seed(cfg.seed, "epoch:" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t first = 0; first < order.size(); first += bs) {
      const std::size_t count = std::min(bs, order.size() - first);
      const TupleBatch batch = gather_batch(store, train_tuples, order, first, count);
      grads.setZero();
      const LossBreakdown loss = total_loss(params, batch, cfg, &grads);
      if (!std::isfinite(loss.total()))
        throw InputError("non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch offset " + std::to_string(first) +
                         " (recon=" + std::to_string(loss.recon) +
                         ", triplet=" + std::to_string(loss.triplet) + ")");
      epoch_loss += loss.total();
      adam_step(params, grads, adam, lr);
    }
    best.train_history.push_back(epoch_loss / static_cast<double>(order.size()));

    const double val = evaluate_loss(params, store, val_tuples, cfg).total() /
                       static_cast<double>(val_tuples.size());
    require(std::isfinite(val), "non-finite validation loss at epoch " + std::to_string(epoch));
    best.val_history.push_back(val);
    if (val < best_val) {
      best_val = val;
      best.params = params;
      best.best_epoch = epoch;
    }
    if (log)
      *log << "epoch " << epoch << ": lr=" << lr
           << " train_loss=" << best.train_history.back() << " val_loss=" << val
           << (best.best_epoch == epoch ? " *" : "") << '\n';

    if (epoch - best.best_epoch >= cfg.patience) break;
  }
  return best;
}

}  // namespace bmt
