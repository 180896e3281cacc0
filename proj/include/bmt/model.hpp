#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bmt/rng.hpp"

namespace bmt {

enum class Variant { kDcn, kTripletOnly, kTeAutoencoder, kTeDcn };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd w;      // out x in
  Eigen::VectorXd b;      // out
  double slope = 0.25;    // PReLU negative-side slope, channel-shared
  bool activated = true;  // final reconstruction layer is linear
};

// Fixed encoder-decoder stack. The embedding is the activated output of the
// narrowest layer; kTripletOnly keeps the encoder half only.
struct NetworkParams {
  Variant variant = Variant::kTeDcn;
  std::vector<DenseLayer> layers;
  int bottleneck = 0;  // layer index whose output is the embedding

  // He-uniform fan-in weights, zero biases, PReLU slopes 0.25.
  static NetworkParams create(Variant v, const std::vector<int>& dims, Rng& rng);
  static std::vector<int> default_dims() { return {420, 300, 200, 64, 200, 300, 420}; }

  int input_dim() const { return static_cast<int>(layers.front().w.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().w.rows()); }
  int embedding_dim() const {
    return static_cast<int>(layers[static_cast<std::size_t>(bottleneck)].w.rows());
  }
  bool has_decoder() const { return variant != Variant::kTripletOnly; }
};

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  std::vector<double> slope;

  static Gradients zeros_like(const NetworkParams& p);
  void setZero();
};

// Per-layer pre- and post-activation values for a batch (rows = batch items).
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

// Runs all layers; returns the final output (the embedding for encoder-only
// networks). Rows of x are independent inputs.
const Eigen::MatrixXd& forward(const NetworkParams& p, const Eigen::MatrixXd& x,
                               ForwardCache& cache);

Eigen::MatrixXd encode(const NetworkParams& p, const Eigen::MatrixXd& x);
Eigen::MatrixXd decode(const NetworkParams& p, const Eigen::MatrixXd& e);

// Squared L2 distance summed over batch rows.
double reconstruction_loss(const Eigen::MatrixXd& x_hat, const Eigen::MatrixXd& target);

// sum_i max(0, m + D(ea,ep) - D(ea,en)) with unsquared Euclidean D.
double triplet_loss(const Eigen::MatrixXd& ea, const Eigen::MatrixXd& ep,
                    const Eigen::MatrixXd& en, double margin);

double l2_weight_penalty(const NetworkParams& p);  // sum ||W||^2, weights only

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 0.1;
  int lr_decay_every = 10;  // epochs
  double margin = 2.0;
  double lambda = 0.01;
  int batch_size = 256;
  int max_epochs = 100;
  int patience = 5;
  std::uint64_t seed = 0;
};

// Aligned rows across the four tuple members.
struct TupleBatch {
  Eigen::MatrixXd xa, xp, xn, xnp;
  Eigen::Index rows() const { return xa.rows(); }
};

struct LossBreakdown {
  double recon = 0.0;
  double triplet = 0.0;
  double l2 = 0.0;
  double total() const { return recon + triplet + l2; }
};

// Which terms of the full objective are evaluated; defaults follow the
// network's variant. Exposed so reduced forms can be checked against each
// other (TE-DCN with only the anchor->positive branch is exactly DCN).
struct TermMask {
  bool recon_ap = true;
  bool recon_pa = true;
  bool recon_n = true;
  bool triplet = true;

  static TermMask for_variant(Variant v);
};

// Batch loss; when `grads` is non-null, accumulates exact analytic gradients
// (including PReLU slopes and the 2*lambda*W term) into it.
LossBreakdown total_loss(const NetworkParams& p, const TupleBatch& batch,
                         const TrainConfig& cfg, Gradients* grads = nullptr,
                         const TermMask* mask_override = nullptr);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Gradients m, v;
  long t = 0;

  static AdamState init(const NetworkParams& p);
};

void adam_step(NetworkParams& p, const Gradients& g, AdamState& state, double lr,
               const AdamConfig& cfg = {});

double lr_for_epoch(const TrainConfig& cfg, int epoch);  // epoch is 0-based

}  // namespace bmt
