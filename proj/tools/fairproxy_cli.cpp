// fairproxy command-line driver.
//
// Exit codes: 0 ok, 2 config or usage error, 3 data error, 4 training
// diverged, 1 anything unexpected.

#include "fairproxy/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace fairproxy;

namespace {

enum Exit { ok = 0, internal = 1, config = 2, data = 3, diverged = 4 };

struct Common {
  std::string config_path;
  std::size_t subsample = 0;
  bool subsample_set = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "run config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--subsample", c.subsample, "keep a seeded subset of N rows (0 keeps all)")
      ->each([&c](const std::string&) { c.subsample_set = true; });
}

RunConfig load(const Common& c) {
  RunConfig cfg = load_run_config(c.config_path);
  if (c.subsample_set) cfg.subsample = c.subsample;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensitive-proxy inference and fair classification"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "per-epoch progress on stderr");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  Common common;
  std::string checkpoint, latents;

  auto* prep = app.add_subcommand("prepare-data", "load, subsample and split; write split and data summary");
  add_common(prep, common);

  auto* inf = app.add_subcommand("train-inference", "train the proxy model, export latents, audit leakage");
  add_common(inf, common);

  auto* exp = app.add_subcommand("export-latents", "sample latent banks from a trained proxy model");
  add_common(exp, common);
  exp->add_option("--checkpoint", checkpoint, "inference checkpoint (default: output dir)");

  auto* pred = app.add_subcommand("train-predictor", "train the fair classifier against the latent bank");
  add_common(pred, common);
  pred->add_option("--latents", latents, "training latent bank (default: output dir)");

  auto* eval = app.add_subcommand("evaluate", "score a trained classifier on the test split");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "predictor checkpoint (default: output dir)");

  auto* sweep = app.add_subcommand("sweep", "train over a lambda grid with repeats");
  add_common(sweep, common);
  sweep->add_option("--latents", latents, "training latent bank (default: output dir)");

  std::string pmf_path;
  auto* oracle = app.add_subcommand("oracle-hgr", "exact HGR of a discrete joint given as a CSV table");
  oracle->add_option("pmf", pmf_path, "CSV of non-negative weights")->required();

  std::string synth_out = ".";
  std::size_t synth_n = 10000;
  std::uint64_t synth_seed = 1;
  SyntheticSpec spec;
  auto* synth = app.add_subcommand("make-synthetic", "write a synthetic dataset and its schema");
  synth->add_option("-o,--out", synth_out, "output directory");
  synth->add_option("-n,--rows", synth_n, "row count");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--xc-dim", spec.xc_dim);
  synth->add_option("--xd-dim", spec.xd_dim);
  synth->add_option("--p-s", spec.p_s);
  synth->add_option("--xc-to-xd", spec.xc_to_xd);
  synth->add_option("--s-to-xd", spec.s_to_xd);
  synth->add_option("--s-to-y", spec.s_to_y);
  synth->add_option("--noise", spec.noise);
  synth->add_option("--label-scale", spec.label_scale);
  synth->add_option("--fpr-shift", spec.fpr_shift);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Exit::ok : Exit::config;
  }
  log::set_level(quiet ? log::Level::quiet : verbose ? log::Level::info : log::Level::warn);

  try {
    if (*prep) {
      std::cout << pipeline::cmd_prepare_data(load(common)).dump(2) << '\n';
    } else if (*inf) {
      const auto r = pipeline::cmd_train_inference(load(common));
      std::cout << "final adversary HGR(x_c,z) " << pipeline::num(r.history.back().hgr_xc_z) << "\n"
                << "audit HGR(x_c,z) " << pipeline::num(r.audit_hgr_xc_z) << '\n';
    } else if (*exp) {
      pipeline::cmd_export_latents(load(common), checkpoint);
    } else if (*pred) {
      const auto t = pipeline::cmd_train_predictor(load(common), latents);
      const auto& last = t.history.back();
      std::cout << "accuracy " << pipeline::num(last.accuracy) << " p_rule " << pipeline::num(last.p_rule)
                << " delta_fpr " << pipeline::num(last.delta_fpr) << " delta_fnr " << pipeline::num(last.delta_fnr)
                << '\n';
    } else if (*eval) {
      std::cout << pipeline::cmd_evaluate(load(common), checkpoint).to_json().dump(2) << '\n';
    } else if (*sweep) {
      const auto rows = pipeline::cmd_sweep(load(common), latents);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.status != "ok";
      std::cout << rows.size() << " runs, " << failed << " diverged\n";
    } else if (*oracle) {
      std::cout << pipeline::num(hgr_oracle(pipeline::read_pmf_csv(pmf_path))) << '\n';
    } else if (*synth) {
      pipeline::cmd_make_synthetic(synth_out, synth_n, synth_seed, spec);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config;
  } catch (const NumericalError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return Exit::diverged;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return Exit::data;
  } catch (const bin::FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return Exit::data;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return Exit::data;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Exit::internal;
  }
  return Exit::ok;
}
