#pragma once

// Sensitive-proxy inference. A diagonal-Gaussian encoder q(z | x_c, x_d, y)
// and decoders p(x_d | x_c, z), p(y | x_c, x_d, z) are trained on
//
//   reconstruction NLL + lambda_mmd * MMD(q(z) || N(0, I)) + lambda_inf * HGR(x_c, z)
//
// against an HGR adversary that is updated by several ascent steps per
// batch, so the latent z captures what x_c cannot explain.

#include "fairproxy/adam.hpp"
#include "fairproxy/checkpoint.hpp"
#include "fairproxy/dataset.hpp"
#include "fairproxy/hgr.hpp"
#include "fairproxy/latent_bank.hpp"
#include "fairproxy/mlp.hpp"
#include "fairproxy/mmd.hpp"
#include "fairproxy/rng.hpp"

#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fairproxy {

struct InferenceConfig {
  std::size_t d_z = 5;
  double lambda_mmd = 1.0;
  double lambda_inf = 0.2;
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  double lr = 1e-3;
  std::vector<std::size_t> hidden{128, 128};
  HgrConfig adversary{};
  std::vector<double> mmd_multipliers{0.5, 1.0, 2.0, 4.0};
  double logvar_min = -10.0;
  double logvar_max = 3.0;
  std::size_t audit_epochs = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (d_z < 1) throw std::invalid_argument("d_z must be at least 1");
    if (lambda_mmd < 0.0 || lambda_inf < 0.0) throw std::invalid_argument("lambdas must be non-negative");
    if (batch_size < kMinHgrBatch) throw std::invalid_argument("batch size must be at least 8");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (logvar_min > logvar_max) throw std::invalid_argument("logvar_min exceeds logvar_max");
    if (mmd_multipliers.empty()) throw std::invalid_argument("at least one MMD bandwidth multiplier required");
  }
};

struct Posterior {
  Var mu;
  Var logvar;
};

class SrcvaeModel {
 public:
  SrcvaeModel(const Encoding& enc, const InferenceConfig& cfg)
      : cfg_(cfg), xd_blocks_(enc.xd_blocks), xc_dim_(enc.xc_dim), xd_dim_(enc.xd_dim) {
    cfg_.validate();
    auto rng = make_rng(cfg_.seed, streams::init);
    encoder_ = Mlp("encoder", layer_widths(xc_dim_ + xd_dim_ + 1, cfg_.hidden, 2 * cfg_.d_z), Activation::leaky_relu, rng);
    dec_xd_ = Mlp("dec_xd", layer_widths(xc_dim_ + cfg_.d_z, cfg_.hidden, xd_dim_), Activation::leaky_relu, rng);
    dec_y_ = Mlp("dec_y", layer_widths(xc_dim_ + xd_dim_ + cfg_.d_z, cfg_.hidden, 1), Activation::leaky_relu, rng);
    auto adv_rng = make_rng(cfg_.seed, streams::adversary);
    adversary_ = HgrEstimator("inf_adv", xc_dim_, cfg_.d_z, cfg_.adversary, adv_rng);
    opt_enc_ = Adam(encoder_.params(), AdamConfig{cfg_.lr});
    opt_dxd_ = Adam(dec_xd_.params(), AdamConfig{cfg_.lr});
    opt_dy_ = Adam(dec_y_.params(), AdamConfig{cfg_.lr});
  }

  const InferenceConfig& config() const { return cfg_; }
  std::size_t d_z() const { return cfg_.d_z; }
  Mlp& encoder() { return encoder_; }
  Mlp& dec_xd() { return dec_xd_; }
  Mlp& dec_y() { return dec_y_; }
  HgrEstimator& adversary() { return adversary_; }

  void check_rows(const Tensor& xc, const Tensor& xd, const Tensor& y) const {
    if (xc.rows() != xd.rows() || xc.rows() != y.rows()) throw ShapeError("srcvae: row counts of x_c, x_d, y differ");
    if (xc.cols() != xc_dim_ || xd.cols() != xd_dim_ || y.cols() != 1) throw ShapeError("srcvae: feature schema mismatch");
  }

  Posterior encode(Graph& g, Var xc, Var xd, Var y) {
    Var out = encoder_.forward(g, ad::concat_cols({xc, xd, y}));
    Var mu = ad::slice_cols(out, 0, cfg_.d_z);
    Var logvar = ad::clamp(ad::slice_cols(out, cfg_.d_z, 2 * cfg_.d_z), cfg_.logvar_min, cfg_.logvar_max);
    return {mu, logvar};
  }

  // z = mu + exp(logvar / 2) * eps, eps ~ N(0, I).
  Var encode_sample(Graph& g, Var xc, Var xd, Var y, std::mt19937_64& rng) {
    Posterior post = encode(g, xc, xd, y);
    const Tensor& mu = post.mu.value();
    if (!mu.all_finite() || !post.logvar.value().all_finite()) throw NumericalError("non-finite encoder output");
    Tensor eps(mu.rows(), mu.cols());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& e : eps.data()) e = normal(rng);
    Var sigma = ad::exp(ad::scale(post.logvar, 0.5));
    return ad::add(post.mu, ad::mul(sigma, g.constant(std::move(eps))));
  }

  // Tape-free posterior parameters (mu, sigma).
  std::pair<Tensor, Tensor> posterior(const Tensor& xc, const Tensor& xd, const Tensor& y) const {
    check_rows(xc, xd, y);
    Tensor out = encoder_.apply(hconcat({&xc, &xd, &y}));
    Tensor mu = out.col_block(0, cfg_.d_z);
    Tensor sigma = out.col_block(cfg_.d_z, 2 * cfg_.d_z);
    for (auto& v : sigma.data()) v = std::exp(0.5 * std::clamp(v, cfg_.logvar_min, cfg_.logvar_max));
    if (!mu.all_finite() || !sigma.all_finite()) throw NumericalError("non-finite encoder output");
    return {std::move(mu), std::move(sigma)};
  }

  // Batch-mean negative log-likelihood of (x_d, y) given (x_c, z), per attribute:
  // unit-variance Gaussian per continuous x_d column, softmax per
  // categorical block, Bernoulli on y.
  Var reconstruction_loss(Graph& g, Var xc, const Tensor& xd, const Tensor& y, Var z) {
    if (xd.cols() != xd_dim_) throw ShapeError("reconstruction_loss: x_d schema mismatch");
    Var xd_hat = dec_xd_.forward(g, ad::concat_cols({xc, z}));
    Var loss;
    bool first = true;
    for (const auto& b : xd_blocks_) {
      Var part = ad::slice_cols(xd_hat, b.offset, b.offset + b.width);
      Tensor target = xd.col_block(b.offset, b.offset + b.width);
      Var term = b.kind == ColumnKind::continuous ? ad::half_squared_error(part, target) : ad::softmax_xent(part, target);
      loss = first ? term : ad::add(loss, term);
      first = false;
    }
    Var y_logit = dec_y_.forward(g, ad::concat_cols({xc, g.constant(xd), z}));
    Var y_term = ad::bce_with_logits(y_logit, y);
    if (first) return y_term;
    // Averaged over reconstructed attributes (x_d blocks plus y), so the
    // penalty weights do not scale with the width of the schema.
    return ad::scale(ad::add(loss, y_term), 1.0 / static_cast<double>(xd_blocks_.size() + 1));
  }

  struct StepStats {
    double loss = 0.0;
    double reconstruction = 0.0;
    double mmd = 0.0;
    double hgr = 0.0;
  };

  // One outer min-max iteration on a batch: the adversary ascends on
  // HGR(x_c, z) with z held fixed, then encoder and decoders take one
  // descent step with the adversary frozen.
  StepStats train_step(const Tensor& xc, const Tensor& xd, const Tensor& y, std::mt19937_64& noise_rng,
                       std::mt19937_64& prior_rng) {
    check_rows(xc, xd, y);
    StepStats st;
    Graph g;
    Var xc_v = g.constant(xc);
    Var z = encode_sample(g, xc_v, g.constant(xd), g.constant(y), noise_rng);

    st.hgr = adversary_.estimate_step(xc, z.value());

    Var recon = reconstruction_loss(g, xc_v, xd, y, z);
    Var loss = recon;
    st.reconstruction = recon.value().item();
    if (cfg_.lambda_mmd > 0.0) {
      Tensor prior(z.rows(), cfg_.d_z);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& v : prior.data()) v = normal(prior_rng);
      MmdConfig mc;
      mc.bandwidths = median_heuristic_bandwidths(prior, cfg_.mmd_multipliers);
      mc.prior_sample_count = prior.rows();
      Var mmd = mmd2(z, g.constant(std::move(prior)), mc);
      st.mmd = mmd.value().item();
      loss = ad::add(loss, ad::scale(mmd, cfg_.lambda_mmd));
    }
    if (cfg_.lambda_inf > 0.0) {
      loss = ad::add(loss, ad::scale(adversary_.penalty(g, xc_v, z), cfg_.lambda_inf));
    }
    st.loss = loss.value().item();
    if (!std::isfinite(st.loss)) throw NumericalError("non-finite inference loss");
    g.backward(loss);
    opt_enc_.step(encoder_.params());
    opt_dxd_.step(dec_xd_.params());
    opt_dy_.step(dec_y_.params());
    return st;
  }

  std::vector<const ParamSet*> param_sets() const {
    return {&encoder_.params(), &dec_xd_.params(), &dec_y_.params(), &adversary_.f().params(), &adversary_.g().params()};
  }

  void load(const std::vector<NamedTensor>& records) {
    load_params(encoder_.params(), records);
    load_params(dec_xd_.params(), records);
    load_params(dec_y_.params(), records);
    load_params(adversary_.f().params(), records);
    load_params(adversary_.g().params(), records);
  }

 private:
  InferenceConfig cfg_;
  std::vector<FeatureBlock> xd_blocks_;
  std::size_t xc_dim_ = 0, xd_dim_ = 0;
  Mlp encoder_, dec_xd_, dec_y_;
  HgrEstimator adversary_;
  Adam opt_enc_, opt_dxd_, opt_dy_;
};

struct InferenceHistoryRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double reconstruction = 0.0;
  double mmd = 0.0;
  double hgr_xc_z = 0.0;  // mean adversary estimate over the epoch
};

struct TrainingDiverged : NumericalError {
  TrainingDiverged(const std::string& what, std::shared_ptr<SrcvaeModel> last_good_model, std::size_t epoch)
      : NumericalError(what), last_good(std::move(last_good_model)), epoch(epoch) {}
  std::shared_ptr<SrcvaeModel> last_good;
  std::size_t epoch;
};

struct TrainedInference {
  std::shared_ptr<SrcvaeModel> model;
  std::vector<InferenceHistoryRow> history;
};

// Seeded minibatch order over n rows; a trailing batch smaller than the
// HGR minimum is folded into the previous one.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch) {
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(b),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch)));
  }
  if (out.size() > 1 && out.back().size() < kMinHgrBatch) {
    auto tail = std::move(out.back());
    out.pop_back();
    out.back().insert(out.back().end(), tail.begin(), tail.end());
  }
  return out;
}

inline TrainedInference train_inference(const TabularDataset& train, const InferenceConfig& cfg) {
  if (train.size() < kMinHgrBatch) throw DataError("training split too small for inference");
  TrainedInference out;
  out.model = std::make_shared<SrcvaeModel>(train.encoding, cfg);
  auto shuffle_rng = make_rng(cfg.seed, streams::shuffle);
  auto noise_rng = make_rng(cfg.seed, streams::noise);
  auto prior_rng = make_rng(cfg.seed, streams::prior);
  const Tensor y_all = train.y_column();
  auto last_good = std::make_shared<SrcvaeModel>(*out.model);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    InferenceHistoryRow row;
    row.epoch = epoch;
    std::size_t batches = 0;
    try {
      for (const auto& idx : make_batches(train.size(), cfg.batch_size, shuffle_rng)) {
        const auto st = out.model->train_step(train.x_c.gather_rows(idx), train.x_d.gather_rows(idx),
                                              y_all.gather_rows(idx), noise_rng, prior_rng);
        row.loss += st.loss;
        row.reconstruction += st.reconstruction;
        row.mmd += st.mmd;
        row.hgr_xc_z += st.hgr;
        ++batches;
      }
    } catch (const NumericalError& e) {
      throw TrainingDiverged(std::string("inference diverged in epoch ") + std::to_string(epoch) + ": " + e.what(),
                             last_good, epoch - 1);
    }
    const double nb = static_cast<double>(batches);
    row.loss /= nb;
    row.reconstruction /= nb;
    row.mmd /= nb;
    row.hgr_xc_z /= nb;
    out.history.push_back(row);
    log::info("inference epoch " + std::to_string(epoch) + " loss " + std::to_string(row.loss) + " hgr " +
              std::to_string(row.hgr_xc_z));
    *last_good = *out.model;
  }
  return out;
}

// One reparameterized z per row, drawn from a dedicated seed.
inline Tensor sample_latents(const SrcvaeModel& model, const TabularDataset& ds, std::uint64_t seed) {
  auto [mu, sigma] = model.posterior(ds.x_c, ds.x_d, ds.y_column());
  auto rng = make_rng(seed, streams::export_latents);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z = mu;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += sigma[i] * normal(rng);
  return z;
}

struct LatentExport {
  ProxyBank bank;
  Tensor mu;
  Tensor sigma;
};

// k independent reparameterized samples per row.
inline LatentExport export_latents(const SrcvaeModel& model, const TabularDataset& ds, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("export_latents: k must be positive");
  LatentExport ex;
  std::tie(ex.mu, ex.sigma) = model.posterior(ds.x_c, ds.x_d, ds.y_column());
  const std::size_t d = model.d_z();
  ex.bank = ProxyBank(ds.size(), k, d);
  auto rng = make_rng(seed, streams::export_latents);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t j = 0; j < d; ++j) ex.bank.at(r, s, j) = ex.mu(r, j) + ex.sigma(r, j) * normal(rng);
    }
  }
  return ex;
}

// Trains a fresh HGR estimator on a seeded 75% of the rows of (u, v) for
// `epochs` passes and returns its objective on the held-out 25%, clamped to
// [0, 1]. Scoring held-out rows keeps the estimator from earning credit by
// isolating individual rows (rare one-hot levels make that easy in-sample).
inline double audit_hgr(const Tensor& u, const Tensor& v, const HgrConfig& cfg, std::size_t epochs,
                        std::size_t batch_size, std::uint64_t seed) {
  if (u.rows() != v.rows()) throw ShapeError("audit_hgr: row counts differ");
  if (u.rows() < 4 * kMinHgrBatch) throw ShapeError("audit_hgr: need at least 32 rows");
  const SplitIndices parts = split_indices(u.rows(), 0.75, derive_seed(seed, streams::split));
  const Tensor u_fit = u.gather_rows(parts.train), v_fit = v.gather_rows(parts.train);
  auto init_rng = make_rng(seed, streams::audit);
  HgrEstimator est("audit", u.cols(), v.cols(), cfg, init_rng);
  auto shuffle_rng = make_rng(seed, streams::shuffle);
  for (std::size_t e = 0; e < epochs; ++e) {
    for (const auto& idx : make_batches(u_fit.rows(), batch_size, shuffle_rng)) {
      est.estimate_step(u_fit.gather_rows(idx), v_fit.gather_rows(idx));
    }
  }
  const double raw = est.objective(u.gather_rows(parts.test), v.gather_rows(parts.test));
  if (est.last_degenerate()) return 0.0;
  return std::clamp(raw, 0.0, 1.0);
}

// Post-training leakage check: HGR between x_c and one sampled z per row.
inline double audit_leakage(const SrcvaeModel& model, const TabularDataset& ds, std::uint64_t seed) {
  const auto& cfg = model.config();
  return audit_hgr(ds.x_c, sample_latents(model, ds, seed), cfg.adversary, cfg.audit_epochs, cfg.batch_size, seed);
}

}  // namespace fairproxy
