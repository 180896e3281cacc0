#include "bmt/model.hpp"

#include <cmath>

#include "bmt/common.hpp"

namespace bmt {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kDcn: return "dcn";
    case Variant::kTripletOnly: return "triplet";
    case Variant::kTeAutoencoder: return "te-autoencoder";
    case Variant::kTeDcn: return "te-dcn";
  }
  return "unknown";
}

Variant variant_from_name(const std::string& name) {
  if (name == "dcn") return Variant::kDcn;
  if (name == "triplet" || name == "triplet-only") return Variant::kTripletOnly;
  if (name == "te-autoencoder" || name == "te-ae") return Variant::kTeAutoencoder;
  if (name == "te-dcn") return Variant::kTeDcn;
  throw InputError("unknown variant: " + name +
                   " (expected dcn|triplet|te-autoencoder|te-dcn)");
}

NetworkParams NetworkParams::create(Variant v, const std::vector<int>& dims, Rng& rng) {
  require(dims.size() >= 3, "network needs at least input, bottleneck, output dims");
  const auto narrowest =
      std::min_element(dims.begin() + 1, dims.end()) - dims.begin();
  require(narrowest + 1 < static_cast<std::ptrdiff_t>(dims.size()),
          "bottleneck cannot be the output layer");

  const std::size_t n_layers = (v == Variant::kTripletOnly)
                                   ? static_cast<std::size_t>(narrowest)
                                   : dims.size() - 1;
  NetworkParams p;
  p.variant = v;
  p.bottleneck = static_cast<int>(narrowest) - 1;
  p.layers.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int in = dims[l], out = dims[l + 1];
    DenseLayer& layer = p.layers[l];
    layer.w.resize(out, in);
    const double limit = std::sqrt(6.0 / in);  // He-uniform, fan-in
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.w(r, c) = rng.uniform(-limit, limit);
    layer.b = Eigen::VectorXd::Zero(out);
    layer.slope = 0.25;
    // the last layer of a decoder network is a linear reconstruction layer
    layer.activated = (v == Variant::kTripletOnly) || (l + 1 < n_layers);
  }
  return p;
}

Gradients Gradients::zeros_like(const NetworkParams& p) {
  Gradients g;
  g.w.reserve(p.layers.size());
  g.b.reserve(p.layers.size());
  for (const auto& layer : p.layers) {
    g.w.emplace_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    g.b.emplace_back(Eigen::VectorXd::Zero(layer.b.size()));
    g.slope.push_back(0.0);
  }
  return g;
}

void Gradients::setZero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
  for (auto& s : slope) s = 0.0;
}

namespace {

Eigen::MatrixXd prelu(const Eigen::MatrixXd& z, double slope) {
  return z.cwiseMax(0.0) + slope * z.cwiseMin(0.0);
}

void run_layers(const NetworkParams& p, std::size_t first, std::size_t last,
                const Eigen::MatrixXd& x, ForwardCache& cache) {
  cache.pre.resize(p.layers.size());
  cache.post.resize(p.layers.size());
  const Eigen::MatrixXd* cur = &x;
  for (std::size_t l = first; l <= last; ++l) {
    const DenseLayer& layer = p.layers[l];
    require(cur->cols() == layer.w.cols(), "dimension mismatch at layer " + std::to_string(l));
    cache.pre[l] = (*cur) * layer.w.transpose();
    cache.pre[l].rowwise() += layer.b.transpose();
    cache.post[l] = layer.activated ? prelu(cache.pre[l], layer.slope) : cache.pre[l];
    cur = &cache.post[l];
  }
}

// Backprop from d(post) of layer `last` down to the input. `extra_bottleneck`
// (may be empty) is added to d(post) of the bottleneck layer on the way down.
void backward_layers(const NetworkParams& p, const ForwardCache& cache,
                     std::size_t first, std::size_t last, Eigen::MatrixXd d_post,
                     const Eigen::MatrixXd& extra_bottleneck, Gradients& grads) {
  for (std::size_t li = last + 1; li-- > first;) {
    const DenseLayer& layer = p.layers[li];
    if (static_cast<int>(li) == p.bottleneck && extra_bottleneck.size() > 0)
      d_post += extra_bottleneck;

    Eigen::MatrixXd d_pre;
    if (layer.activated) {
      const auto& z = cache.pre[li];
      // d/dz prelu = 1 for z >= 0 else slope; d/dslope = z for z < 0 else 0
      const double slope = layer.slope;
      d_pre = d_post.cwiseProduct(
          z.unaryExpr([slope](double v) { return v >= 0.0 ? 1.0 : slope; }));
      grads.slope[li] += d_post.cwiseProduct(z.cwiseMin(0.0)).sum();
    } else {
      d_pre = std::move(d_post);
    }

    const Eigen::MatrixXd& below = (li == first) ? cache.input : cache.post[li - 1];
    grads.w[li].noalias() += d_pre.transpose() * below;
    grads.b[li] += d_pre.colwise().sum().transpose();
    if (li > first) d_post = d_pre * layer.w;
  }
}

struct TripletGrad {
  Eigen::MatrixXd d_ea, d_ep, d_en;
};

// Hinge with unsquared Euclidean D; subgradient 0 at the hinge point and at
// coincident embeddings.
double triplet_loss_grad(const Eigen::MatrixXd& ea, const Eigen::MatrixXd& ep,
                         const Eigen::MatrixXd& en, double margin, TripletGrad* grad) {
  double loss = 0.0;
  if (grad) {
    grad->d_ea = Eigen::MatrixXd::Zero(ea.rows(), ea.cols());
    grad->d_ep = Eigen::MatrixXd::Zero(ea.rows(), ea.cols());
    grad->d_en = Eigen::MatrixXd::Zero(ea.rows(), ea.cols());
  }
  for (Eigen::Index i = 0; i < ea.rows(); ++i) {
    const Eigen::RowVectorXd dap = ea.row(i) - ep.row(i);
    const Eigen::RowVectorXd dan = ea.row(i) - en.row(i);
    const double d_ap = std::sqrt(std::max(0.0, dap.squaredNorm()));
    const double d_an = std::sqrt(std::max(0.0, dan.squaredNorm()));
    const double h = margin + d_ap - d_an;
    if (h <= 0.0) continue;
    loss += h;
    if (!grad) continue;
    if (d_ap > 0.0) {
      grad->d_ea.row(i) += dap / d_ap;
      grad->d_ep.row(i) -= dap / d_ap;
    }
    if (d_an > 0.0) {
      grad->d_ea.row(i) -= dan / d_an;
      grad->d_en.row(i) += dan / d_an;
    }
  }
  return loss;
}

}  // namespace

const Eigen::MatrixXd& forward(const NetworkParams& p, const Eigen::MatrixXd& x,
                               ForwardCache& cache) {
  cache.input = x;
  run_layers(p, 0, p.layers.size() - 1, cache.input, cache);
  return cache.post.back();
}

Eigen::MatrixXd encode(const NetworkParams& p, const Eigen::MatrixXd& x) {
  ForwardCache cache;
  cache.input = x;
  run_layers(p, 0, static_cast<std::size_t>(p.bottleneck), cache.input, cache);
  return cache.post[static_cast<std::size_t>(p.bottleneck)];
}

Eigen::MatrixXd decode(const NetworkParams& p, const Eigen::MatrixXd& e) {
  require(p.has_decoder(), "network variant has no decoder");
  ForwardCache cache;
  cache.input = e;
  run_layers(p, static_cast<std::size_t>(p.bottleneck) + 1, p.layers.size() - 1,
             cache.input, cache);
  return cache.post.back();
}

double reconstruction_loss(const Eigen::MatrixXd& x_hat, const Eigen::MatrixXd& target) {
  require(x_hat.rows() == target.rows() && x_hat.cols() == target.cols(),
          "reconstruction loss dimension mismatch");
  return (x_hat - target).squaredNorm();
}

double triplet_loss(const Eigen::MatrixXd& ea, const Eigen::MatrixXd& ep,
                    const Eigen::MatrixXd& en, double margin) {
  require(ea.rows() == ep.rows() && ea.rows() == en.rows() && ea.cols() == ep.cols() &&
              ea.cols() == en.cols(),
          "triplet loss dimension mismatch");
  require(margin >= 0.0, "margin must be non-negative");
  return triplet_loss_grad(ea, ep, en, margin, nullptr);
}

double l2_weight_penalty(const NetworkParams& p) {
  double acc = 0.0;
  for (const auto& layer : p.layers) acc += layer.w.squaredNorm();
  return acc;
}

TermMask TermMask::for_variant(Variant v) {
  TermMask m;
  switch (v) {
    case Variant::kDcn:
      m.recon_pa = m.recon_n = m.triplet = false;
      break;
    case Variant::kTripletOnly:
      m.recon_ap = m.recon_pa = m.recon_n = false;
      break;
    case Variant::kTeAutoencoder:
    case Variant::kTeDcn:
      break;
  }
  return m;
}

LossBreakdown total_loss(const NetworkParams& p, const TupleBatch& batch,
                         const TrainConfig& cfg, Gradients* grads,
                         const TermMask* mask_override) {
  const TermMask mask = mask_override ? *mask_override : TermMask::for_variant(p.variant);
  const bool autoenc = (p.variant == Variant::kTeAutoencoder);
  const std::size_t last = p.layers.size() - 1;
  const auto bneck = static_cast<std::size_t>(p.bottleneck);

  LossBreakdown loss;
  const bool need_p_branch = mask.recon_pa || mask.triplet;
  const bool need_n_branch = mask.recon_n || mask.triplet;

  ForwardCache ca, cp, cn;
  forward(p, batch.xa, ca);
  if (need_p_branch) forward(p, batch.xp, cp);
  if (need_n_branch) forward(p, batch.xn, cn);

  // reconstruction targets per branch; TE-autoencoder reconstructs the inputs
  const Eigen::MatrixXd* target_a = autoenc ? &batch.xa : &batch.xp;
  const Eigen::MatrixXd* target_p = autoenc ? &batch.xp : &batch.xa;
  const Eigen::MatrixXd* target_n = autoenc ? &batch.xn : &batch.xnp;

  if (p.has_decoder()) {
    if (mask.recon_ap) loss.recon += reconstruction_loss(ca.post[last], *target_a);
    if (mask.recon_pa) loss.recon += reconstruction_loss(cp.post[last], *target_p);
    if (mask.recon_n) loss.recon += reconstruction_loss(cn.post[last], *target_n);
  }

  TripletGrad tg;
  if (mask.triplet) {
    const auto& ea = ca.post[bneck];
    const auto& ep = cp.post[bneck];
    const auto& en = cn.post[bneck];
    loss.triplet += triplet_loss_grad(ea, ep, en, cfg.margin, grads ? &tg : nullptr);
  }

  loss.l2 = cfg.lambda * l2_weight_penalty(p);
  if (!grads) return loss;

  const Eigen::MatrixXd none;
  auto branch_backward = [&](ForwardCache& cache, const Eigen::MatrixXd* target,
                             bool recon_on, const Eigen::MatrixXd& e_grad) {
    if (p.has_decoder() && recon_on) {
      Eigen::MatrixXd d_out = 2.0 * (cache.post[last] - *target);
      backward_layers(p, cache, 0, last, std::move(d_out), e_grad, *grads);
    } else if (e_grad.size() > 0) {
      // no reconstruction flow: inject the triplet gradient at the bottleneck
      backward_layers(p, cache, 0, bneck, e_grad, none, *grads);
    }
  };

  branch_backward(ca, target_a, mask.recon_ap, mask.triplet ? tg.d_ea : none);
  if (need_p_branch) branch_backward(cp, target_p, mask.recon_pa, mask.triplet ? tg.d_ep : none);
  if (need_n_branch) branch_backward(cn, target_n, mask.recon_n, mask.triplet ? tg.d_en : none);

  for (std::size_t l = 0; l < p.layers.size(); ++l)
    grads->w[l] += 2.0 * cfg.lambda * p.layers[l].w;

  return loss;
}

AdamState AdamState::init(const NetworkParams& p) {
  AdamState s;
  s.m = Gradients::zeros_like(p);
  s.v = Gradients::zeros_like(p);
  s.t = 0;
  return s;
}

void adam_step(NetworkParams& p, const Gradients& g, AdamState& state, double lr,
               const AdamConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  auto update = [&](double& param, double grad, double& m, double& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
  };

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    for (Eigen::Index i = 0; i < layer.w.size(); ++i)
      update(layer.w.data()[i], g.w[l].data()[i], state.m.w[l].data()[i],
             state.v.w[l].data()[i]);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i)
      update(layer.b.data()[i], g.b[l].data()[i], state.m.b[l].data()[i],
             state.v.b[l].data()[i]);
    update(layer.slope, g.slope[l], state.m.slope[l], state.v.slope[l]);
  }
}

double lr_for_epoch(const TrainConfig& cfg, int epoch) {
  const int steps = (cfg.lr_decay_every > 0) ? epoch / cfg.lr_decay_every : 0;
  return cfg.lr * std::pow(cfg.lr_decay, steps);
}

}  // namespace bmt
