#pragma once

// Mitigation stage: a classifier h(x_c, x_d) trained with log-loss plus
// adversarial HGR penalties between its predicted probability and sampled
// sensitive proxies z.
//
//   dp: loss + lambda_dp * HGR(h, z)
//   eo: loss + lambda_0 * HGR(h, z | y = 0) + lambda_1 * HGR(h, z | y = 1)

#include "fairproxy/adam.hpp"
#include "fairproxy/checkpoint.hpp"
#include "fairproxy/dataset.hpp"
#include "fairproxy/hgr.hpp"
#include "fairproxy/latent_bank.hpp"
#include "fairproxy/metrics.hpp"
#include "fairproxy/mlp.hpp"
#include "fairproxy/rng.hpp"
#include "fairproxy/srcvae.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace fairproxy {

enum class FairnessMode { dp, eo };

inline const char* to_string(FairnessMode m) { return m == FairnessMode::dp ? "dp" : "eo"; }

struct PredictorConfig {
  FairnessMode mode = FairnessMode::dp;
  double lambda_dp = 0.0;
  double lambda_0 = 0.0;
  double lambda_1 = 0.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 512;
  double lr = 1e-3;
  std::vector<std::size_t> hidden{64, 64};
  HgrConfig adversary{};
  // false trains a plain classifier: no adversaries are built or consulted.
  bool with_adversary = true;
  std::size_t audit_epochs = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (lambda_dp < 0.0 || lambda_0 < 0.0 || lambda_1 < 0.0) throw std::invalid_argument("lambdas must be non-negative");
    if (batch_size < 2 * kMinHgrBatch) throw std::invalid_argument("predictor batch size must be at least 16");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  }
};

class FairPredictor {
 public:
  FairPredictor(std::size_t xc_dim, std::size_t xd_dim, std::size_t d_z, const PredictorConfig& cfg)
      : cfg_(cfg), xc_dim_(xc_dim), xd_dim_(xd_dim) {
    cfg_.validate();
    auto rng = make_rng(cfg_.seed, streams::init);
    h_ = Mlp("h", layer_widths(xc_dim + xd_dim, cfg_.hidden, 1), Activation::leaky_relu, rng);
    opt_h_ = Adam(h_.params(), AdamConfig{cfg_.lr});
    if (cfg_.with_adversary) {
      auto adv_rng = make_rng(cfg_.seed, streams::adversary);
      if (cfg_.mode == FairnessMode::dp) {
        adversaries_.emplace_back("adv_dp", 1, d_z, cfg_.adversary, adv_rng);
      } else {
        adversaries_.emplace_back("adv_eo0", 1, d_z, cfg_.adversary, adv_rng);
        adversaries_.emplace_back("adv_eo1", 1, d_z, cfg_.adversary, adv_rng);
      }
    }
  }

  const PredictorConfig& config() const { return cfg_; }
  FairnessMode mode() const { return cfg_.mode; }
  Mlp& h() { return h_; }
  std::vector<HgrEstimator>& adversaries() { return adversaries_; }

  // P(y = 1 | x_c, x_d). Needs neither z nor y.
  std::vector<double> predict(const Tensor& xc, const Tensor& xd) const {
    if (xc.rows() != xd.rows()) throw ShapeError("predict: row counts of x_c and x_d differ");
    if (xc.cols() != xc_dim_ || xd.cols() != xd_dim_) throw ShapeError("predict: feature schema mismatch");
    const Tensor logits = h_.apply(hconcat({&xc, &xd}));
    std::vector<double> p(logits.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = ad::sigmoid_scalar(logits[i]);
    return p;
  }

  struct StepStats {
    double loss = 0.0;
    double hgr = 0.0;
    std::size_t skipped_terms = 0;
  };

  StepStats train_step(const Tensor& xc, const Tensor& xd, const Tensor& y, const Tensor& z) {
    StepStats st;
    Graph g;
    Var logit = h_.forward(g, g.constant(hconcat({&xc, &xd})));
    Var loss = ad::bce_with_logits(logit, y);
    if (!adversaries_.empty()) {
      Var prob = ad::sigmoid(logit);
      if (cfg_.mode == FairnessMode::dp) {
        st.hgr = adversaries_[0].estimate_step(prob.value(), z);
        if (cfg_.lambda_dp > 0.0) {
          loss = ad::add(loss, ad::scale(adversaries_[0].penalty(g, prob, g.constant(z)), cfg_.lambda_dp));
        }
      } else {
        double hgr_sum = 0.0;
        std::size_t used = 0;
        const double lambdas[2] = {cfg_.lambda_0, cfg_.lambda_1};
        for (int label = 0; label < 2; ++label) {
          std::vector<std::size_t> part;
          for (std::size_t i = 0; i < y.rows(); ++i) {
            if (static_cast<int>(y[i]) == label) part.push_back(i);
          }
          if (part.size() < kMinHgrBatch) {
            ++st.skipped_terms;
            log::info("EO adversary " + std::to_string(label) + ": partition has " + std::to_string(part.size()) +
                      " rows, term skipped");
            continue;
          }
          HgrEstimator& adv = adversaries_[static_cast<std::size_t>(label)];
          const Tensor z_part = z.gather_rows(part);
          hgr_sum += adv.estimate_step(prob.value().gather_rows(part), z_part);
          ++used;
          if (lambdas[label] > 0.0) {
            Var prob_part = gather_rows(g, prob, part);
            loss = ad::add(loss, ad::scale(adv.penalty(g, prob_part, g.constant(z_part)), lambdas[label]));
          }
        }
        st.hgr = used ? hgr_sum / static_cast<double>(used) : 0.0;
      }
    }
    st.loss = loss.value().item();
    if (!std::isfinite(st.loss)) throw NumericalError("non-finite predictor loss");
    g.backward(loss);
    opt_h_.step(h_.params());
    return st;
  }

  std::vector<const ParamSet*> param_sets() const {
    std::vector<const ParamSet*> out{&h_.params()};
    for (const auto& a : adversaries_) {
      out.push_back(&a.f().params());
      out.push_back(&a.g().params());
    }
    return out;
  }

  void load(const std::vector<NamedTensor>& records) {
    load_params(h_.params(), records);
    for (auto& a : adversaries_) {
      load_params(a.f().params(), records);
      load_params(a.g().params(), records);
    }
  }

 private:
  static Var gather_rows(Graph& g, Var a, const std::vector<std::size_t>& idx) {
    const std::size_t rows = a.rows(), cols = a.cols();
    return g.record(a.value().gather_rows(idx), {a}, [idx, rows, cols](Graph& gr, const Tensor& og) {
      Tensor ga(rows, cols);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) ga(idx[i], c) += og(i, c);
      }
      gr.accumulate(0, ga);
    });
  }

  PredictorConfig cfg_;
  std::size_t xc_dim_ = 0, xd_dim_ = 0;
  Mlp h_;
  Adam opt_h_;
  std::vector<HgrEstimator> adversaries_;
};

struct PredictorHistoryRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double p_rule = 0.0;
  double hgr_pred_z = 0.0;
  double delta_fpr = 0.0;
  double delta_fnr = 0.0;
};

struct TrainedPredictor {
  std::shared_ptr<FairPredictor> model;
  std::vector<PredictorHistoryRow> history;
};

inline MetricsReport evaluate(const FairPredictor& model, const TabularDataset& ds) {
  return metrics_report(threshold(model.predict(ds.x_c, ds.x_d)), ds.y, ds.s);
}

// Adds an audited HGR(prediction, z) using the first bank sample of each row.
inline MetricsReport evaluate(const FairPredictor& model, const TabularDataset& ds, const ProxyBank& bank,
                              std::uint64_t seed) {
  if (bank.rows() != ds.size()) throw DataError("latent bank rows do not match the evaluated split");
  MetricsReport r = evaluate(model, ds);
  const auto probs = model.predict(ds.x_c, ds.x_d);
  const auto& cfg = model.config();
  r.hgr_pred_z = audit_hgr(column(probs), bank.sample_slice(0), cfg.adversary, cfg.audit_epochs, cfg.batch_size, seed);
  return r;
}

// Trains in the configured mode. History metrics are measured on `monitor`
// (the training split when absent) after each epoch.
inline TrainedPredictor train_predictor(const TabularDataset& train, const ProxyBank& bank, const PredictorConfig& cfg,
                                        const TabularDataset* monitor = nullptr) {
  if (bank.rows() != train.size()) {
    throw DataError("latent bank has " + std::to_string(bank.rows()) + " rows but the training split has " +
                    std::to_string(train.size()));
  }
  TrainedPredictor out;
  out.model = std::make_shared<FairPredictor>(train.x_c.cols(), train.x_d.cols(), bank.d_z(), cfg);
  auto shuffle_rng = make_rng(cfg.seed, streams::shuffle);
  auto bank_rng = make_rng(cfg.seed, streams::bank);
  const Tensor y_all = train.y_column();
  const TabularDataset& mon = monitor ? *monitor : train;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    PredictorHistoryRow row;
    row.epoch = epoch;
    std::size_t batches = 0;
    for (const auto& idx : make_batches(train.size(), cfg.batch_size, shuffle_rng)) {
      Tensor z = cfg.with_adversary ? bank.draw(idx, bank_rng) : Tensor();
      const auto st = out.model->train_step(train.x_c.gather_rows(idx), train.x_d.gather_rows(idx),
                                            y_all.gather_rows(idx), z);
      row.loss += st.loss;
      row.hgr_pred_z += st.hgr;
      ++batches;
    }
    row.loss /= static_cast<double>(batches);
    row.hgr_pred_z /= static_cast<double>(batches);
    const MetricsReport rep = evaluate(*out.model, mon);
    row.accuracy = rep.accuracy;
    row.p_rule = rep.p_rule;
    row.delta_fpr = rep.delta_fpr;
    row.delta_fnr = rep.delta_fnr;
    out.history.push_back(row);
    log::info("predictor epoch " + std::to_string(epoch) + " loss " + std::to_string(row.loss) + " acc " +
              std::to_string(row.accuracy) + " p_rule " + std::to_string(row.p_rule));
  }
  return out;
}

inline TrainedPredictor train_dp(const TabularDataset& train, const ProxyBank& bank, double lambda_dp,
                                 PredictorConfig cfg, const TabularDataset* monitor = nullptr) {
  cfg.mode = FairnessMode::dp;
  cfg.lambda_dp = lambda_dp;
  return train_predictor(train, bank, cfg, monitor);
}

inline TrainedPredictor train_eo(const TabularDataset& train, const ProxyBank& bank, double lambda_0, double lambda_1,
                                 PredictorConfig cfg, const TabularDataset* monitor = nullptr) {
  cfg.mode = FairnessMode::eo;
  cfg.lambda_0 = lambda_0;
  cfg.lambda_1 = lambda_1;
  const bool has0 = std::find(train.y.begin(), train.y.end(), 0) != train.y.end();
  const bool has1 = std::find(train.y.begin(), train.y.end(), 1) != train.y.end();
  if (!has0 || !has1) throw DataError("equalized-odds training needs both label classes");
  return train_predictor(train, bank, cfg, monitor);
}

}  // namespace fairproxy
