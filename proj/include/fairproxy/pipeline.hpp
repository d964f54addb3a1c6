#pragma once

// Command implementations behind the CLI. Every output file name carries the
// seed, and every number is written with 17 significant digits, so reruns
// with the same config are byte-identical.

#include "fairproxy/config.hpp"
#include "fairproxy/hgr_oracle.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fairproxy::pipeline {

namespace fs = std::filesystem;

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string seed_tag(const RunConfig& cfg) { return "_seed" + std::to_string(cfg.seed); }

inline fs::path output_path(const RunConfig& cfg, const std::string& stem, const std::string& ext) {
  fs::create_directories(cfg.output_dir);
  return fs::path(cfg.output_dir) / (stem + seed_tag(cfg) + ext);
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

inline void write_json(const fs::path& p, const nlohmann::ordered_json& j) { open_out(p) << j.dump(2) << '\n'; }

struct PreparedData {
  TabularDataset train;
  TabularDataset test;
  std::size_t loaded_rows = 0;
  std::size_t dropped_missing = 0;
};

// Load, subsample, split. Deterministic in (data, schema, seed), so every
// command re-derives the same split instead of passing it around.
inline PreparedData load_data(const RunConfig& cfg) {
  const SchemaSpec schema = SchemaSpec::from_file(cfg.schema_path);
  TabularDataset all = load_csv(cfg.data_paths, schema);
  PreparedData out;
  out.loaded_rows = all.size();
  out.dropped_missing = all.raw->dropped_missing;
  if (cfg.subsample > 0 && cfg.subsample < all.size()) {
    all = subsample(all, cfg.subsample, cfg.subsample_seed());
  }
  std::tie(out.train, out.test) = split(all, cfg.train_frac, cfg.data_seed());
  const bool both_s = [&] {
    int seen = 0;
    for (int s : out.test.s) seen |= 1 << s;
    return seen == 3;
  }();
  if (!both_s) throw DataError("test split lacks one of the sensitive groups");
  return out;
}

inline double rate(const std::vector<int>& v) {
  double acc = 0.0;
  for (int x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// ---- prepare-data -------------------------------------------------------

inline nlohmann::ordered_json cmd_prepare_data(const RunConfig& cfg) {
  const PreparedData d = load_data(cfg);
  {
    auto os = open_out(output_path(cfg, "split", ".csv"));
    os << "row_id,partition\n";
    for (std::size_t id : d.train.row_ids) os << id << ",train\n";
    for (std::size_t id : d.test.row_ids) os << id << ",test\n";
  }
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["loaded_rows"] = d.loaded_rows;
  j["dropped_missing"] = d.dropped_missing;
  j["train_rows"] = d.train.size();
  j["test_rows"] = d.test.size();
  j["x_c_dim"] = d.train.encoding.xc_dim;
  j["x_d_dim"] = d.train.encoding.xd_dim;
  j["train_positive_rate"] = rate(d.train.y);
  j["train_sensitive_rate"] = rate(d.train.s);
  j["test_unknown_levels"] = d.test.unknown_levels;
  write_json(output_path(cfg, "data", ".json"), j);
  return j;
}

// ---- inference ----------------------------------------------------------

inline fs::path inference_checkpoint_path(const RunConfig& cfg) { return output_path(cfg, "inference", ".fprx"); }
inline fs::path latent_path(const RunConfig& cfg, const char* part) {
  return output_path(cfg, std::string("latents_") + part, ".fplz");
}

inline void write_inference_history(const fs::path& p, const std::vector<InferenceHistoryRow>& hist) {
  auto os = open_out(p);
  os << "epoch,loss,reconstruction,mmd,hgr_xc_z\n";
  for (const auto& r : hist) {
    os << r.epoch << ',' << num(r.loss) << ',' << num(r.reconstruction) << ',' << num(r.mmd) << ','
       << num(r.hgr_xc_z) << '\n';
  }
}

inline void write_latents(const RunConfig& cfg, const SrcvaeModel& model, const PreparedData& d) {
  // Distinct sample streams per split, both derived from the run seed.
  const auto tr = export_latents(model, d.train, cfg.latent_k, derive_seed(cfg.latent_seed(), 0));
  tr.bank.write(latent_path(cfg, "train").string());
  write_posterior_csv(output_path(cfg, "latents_train", ".csv").string(), d.train.row_ids, tr.mu, tr.sigma);
  const auto te = export_latents(model, d.test, cfg.latent_k, derive_seed(cfg.latent_seed(), 1));
  te.bank.write(latent_path(cfg, "test").string());
  write_posterior_csv(output_path(cfg, "latents_test", ".csv").string(), d.test.row_ids, te.mu, te.sigma);
}

struct InferenceResult {
  std::shared_ptr<SrcvaeModel> model;
  std::vector<InferenceHistoryRow> history;
  double audit_hgr_xc_z = 0.0;
};

inline InferenceResult cmd_train_inference(const RunConfig& cfg, const PreparedData& d) {
  TrainedInference t;
  try {
    t = train_inference(d.train, cfg.inference);
  } catch (const TrainingDiverged& e) {
    if (e.last_good) {
      write_checkpoint(output_path(cfg, "inference_last_good", ".fprx").string(), e.last_good->param_sets());
    }
    throw;
  }
  write_checkpoint(inference_checkpoint_path(cfg).string(), t.model->param_sets());
  write_inference_history(output_path(cfg, "inference_history", ".csv"), t.history);
  write_latents(cfg, *t.model, d);
  InferenceResult r{t.model, t.history, audit_leakage(*t.model, d.train, cfg.audit_seed())};
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["epochs"] = t.history.size();
  j["final_adversary_hgr_xc_z"] = t.history.back().hgr_xc_z;
  j["audit_hgr_xc_z"] = r.audit_hgr_xc_z;
  j["final_reconstruction"] = t.history.back().reconstruction;
  j["final_mmd"] = t.history.back().mmd;
  write_json(output_path(cfg, "inference_summary", ".json"), j);
  return r;
}

inline InferenceResult cmd_train_inference(const RunConfig& cfg) { return cmd_train_inference(cfg, load_data(cfg)); }

inline std::shared_ptr<SrcvaeModel> load_inference(const RunConfig& cfg, const PreparedData& d, const std::string& path) {
  auto model = std::make_shared<SrcvaeModel>(d.train.encoding, cfg.inference);
  model->load(read_checkpoint(path));
  return model;
}

inline void cmd_export_latents(const RunConfig& cfg, const std::string& checkpoint = "") {
  const PreparedData d = load_data(cfg);
  const std::string path = checkpoint.empty() ? inference_checkpoint_path(cfg).string() : checkpoint;
  if (!fs::exists(path)) throw DataError("no inference checkpoint at " + path + " (run train-inference first)");
  write_latents(cfg, *load_inference(cfg, d, path), d);
}

// ---- predictor ----------------------------------------------------------

inline std::string mode_tag(const PredictorConfig& p) { return std::string("_") + to_string(p.mode); }

inline ProxyBank read_bank(const RunConfig& cfg, const char* part, const std::string& override_path = "") {
  const std::string path = override_path.empty() ? latent_path(cfg, part).string() : override_path;
  if (!fs::exists(path)) throw DataError("no latent bank at " + path + " (run train-inference or export-latents)");
  return ProxyBank::read(path);
}

inline void write_predictor_history(const fs::path& p, const std::vector<PredictorHistoryRow>& hist) {
  auto os = open_out(p);
  os << "epoch,loss,accuracy,p_rule,hgr_pred_z,delta_fpr,delta_fnr\n";
  for (const auto& r : hist) {
    os << r.epoch << ',' << num(r.loss) << ',' << num(r.accuracy) << ',' << num(r.p_rule) << ','
       << num(r.hgr_pred_z) << ',' << num(r.delta_fpr) << ',' << num(r.delta_fnr) << '\n';
  }
}

inline void write_predictions(const fs::path& p, const TabularDataset& ds, const std::vector<double>& probs) {
  auto os = open_out(p);
  os << "row_id,probability,predicted_label\n";
  for (std::size_t i = 0; i < probs.size(); ++i) {
    os << ds.row_ids[i] << ',' << num(probs[i]) << ',' << (probs[i] >= 0.5 ? 1 : 0) << '\n';
  }
}

inline MetricsReport report_with_bank(const RunConfig& cfg, const FairPredictor& model, const TabularDataset& test) {
  const fs::path bank_path = latent_path(cfg, "test");
  if (fs::exists(bank_path)) {
    const ProxyBank bank = ProxyBank::read(bank_path.string());
    if (bank.rows() == test.size()) return evaluate(model, test, bank, cfg.audit_seed());
    log::warn("test latent bank does not match the test split; hgr_pred_z omitted");
  }
  return evaluate(model, test);
}

inline fs::path predictor_checkpoint_path(const RunConfig& cfg) {
  return output_path(cfg, "predictor" + mode_tag(cfg.predictor), ".fprx");
}

inline TrainedPredictor cmd_train_predictor(const RunConfig& cfg, const std::string& latents = "") {
  const PreparedData d = load_data(cfg);
  const ProxyBank bank = read_bank(cfg, "train", latents);
  const TrainedPredictor t = cfg.predictor.mode == FairnessMode::dp
                                 ? train_dp(d.train, bank, cfg.predictor.lambda_dp, cfg.predictor, &d.test)
                                 : train_eo(d.train, bank, cfg.predictor.lambda_0, cfg.predictor.lambda_1,
                                            cfg.predictor, &d.test);
  const std::string tag = mode_tag(cfg.predictor);
  write_checkpoint(predictor_checkpoint_path(cfg).string(), t.model->param_sets());
  write_predictor_history(output_path(cfg, "predictor_history" + tag, ".csv"), t.history);
  write_predictions(output_path(cfg, "predictions" + tag, ".csv"), d.test, t.model->predict(d.test.x_c, d.test.x_d));
  write_json(output_path(cfg, "report" + tag, ".json"), report_with_bank(cfg, *t.model, d.test).to_json());
  return t;
}

inline MetricsReport cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint = "") {
  const PreparedData d = load_data(cfg);
  const std::string path = checkpoint.empty() ? predictor_checkpoint_path(cfg).string() : checkpoint;
  if (!fs::exists(path)) throw DataError("no predictor checkpoint at " + path + " (run train-predictor first)");
  PredictorConfig pc = cfg.predictor;
  pc.with_adversary = false;  // only h is needed to predict
  FairPredictor model(d.test.x_c.cols(), d.test.x_d.cols(), 1, pc);
  model.load(read_checkpoint(path));
  const MetricsReport rep = report_with_bank(cfg, model, d.test);
  write_json(output_path(cfg, "evaluation" + mode_tag(cfg.predictor), ".json"), rep.to_json());
  return rep;
}

// ---- sweep --------------------------------------------------------------

struct SweepRow {
  double lambda = 0.0;
  std::size_t repeat = 0;
  std::string status = "ok";
  MetricsReport report{};
};

// Trains one predictor per (lambda, repeat) on the shared split and latent
// bank; repeats differ in initialization, batch order and bank draws. A run
// that diverges is recorded and the sweep moves on.
inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const std::string& latents = "") {
  const PreparedData d = load_data(cfg);
  const ProxyBank bank = read_bank(cfg, "train", latents);
  std::vector<SweepRow> rows;
  const char* obj = to_string(cfg.sweep.objective);
  const fs::path out = output_path(cfg, std::string("sweep_") + obj, ".csv");
  auto os = open_out(out);
  os << "lambda,repeat,accuracy,p_rule,delta_fpr,delta_fnr,dm,status\n";
  for (double lambda : cfg.sweep.grid) {
    for (std::size_t rep = 0; rep < cfg.sweep.repeats; ++rep) {
      PredictorConfig pc = cfg.predictor;
      pc.seed = derive_seed(cfg.predictor.seed, 1000 + rep);
      SweepRow row;
      row.lambda = lambda;
      row.repeat = rep;
      try {
        const TrainedPredictor t = cfg.sweep.objective == FairnessMode::dp
                                       ? train_dp(d.train, bank, lambda, pc)
                                       : train_eo(d.train, bank, lambda, lambda, pc);
        row.report = evaluate(*t.model, d.test);
      } catch (const NumericalError& e) {
        row.status = std::string("diverged: ") + e.what();
        log::warn("sweep lambda " + num(lambda) + " repeat " + std::to_string(rep) + ": " + row.status);
      }
      if (row.status == "ok") {
        os << num(lambda) << ',' << rep << ',' << num(row.report.accuracy) << ',' << num(row.report.p_rule) << ','
           << num(row.report.delta_fpr) << ',' << num(row.report.delta_fnr) << ',' << num(row.report.dm) << ",ok\n";
      } else {
        os << num(lambda) << ',' << rep << ",,,,,," << '"' << row.status << '"' << '\n';
      }
      os.flush();
      log::info("sweep lambda " + num(lambda) + " repeat " + std::to_string(rep) + " accuracy " +
                num(row.report.accuracy) + " p_rule " + num(row.report.p_rule));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---- standalone tools ---------------------------------------------------

// Joint pmf from a CSV of non-negative weights (no header, one row per
// value of the first variable); normalized before the SVD.
inline DiscreteJoint read_pmf_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open pmf file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> r;
    for (const auto& cell : split_list(t, ',')) r.push_back(parse_double(cell, "pmf cell"));
    if (!rows.empty() && r.size() != rows[0].size()) throw DataError("pmf rows have different lengths");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("pmf file is empty");
  Tensor counts(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) counts(i, j) = rows[i][j];
  }
  try {
    return DiscreteJoint::from_counts(counts);
  } catch (const PmfError& e) {
    throw DataError(std::string("invalid pmf: ") + e.what());
  }
}

inline void cmd_make_synthetic(const std::string& out_dir, std::size_t n, std::uint64_t seed, const SyntheticSpec& spec) {
  fs::create_directories(out_dir);
  const auto raw = synthetic_raw(n, seed, spec);
  const std::string stem = "synthetic_seed" + std::to_string(seed);
  {
    auto os = open_out(fs::path(out_dir) / (stem + ".csv"));
    write_raw_csv(*raw, os);
  }
  open_out(fs::path(out_dir) / (stem + ".schema")) << raw->schema.to_text();
}

}  // namespace fairproxy::pipeline
