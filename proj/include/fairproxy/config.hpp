#pragma once

// Run configuration: one plain-text file of `key = value` lines ('#' starts a
// comment). Every key is validated before any compute; unknown keys are
// rejected. The grammar is listed in README.md.

#include "fairproxy/dataset.hpp"
#include "fairproxy/fair_predictor.hpp"
#include "fairproxy/srcvae.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairproxy {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SweepConfig {
  std::vector<double> grid{0.0, 0.24, 0.35, 0.45, 0.48, 0.5};
  std::size_t repeats = 5;
  FairnessMode objective = FairnessMode::dp;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> data_paths;
  std::string schema_path;
  std::size_t subsample = 0;  // 0 keeps every row
  double train_frac = 0.8;
  std::string output_dir = "out";
  std::size_t latent_k = 200;
  InferenceConfig inference{};
  PredictorConfig predictor{};
  SweepConfig sweep{};

  // Seeds of the individual stages, all derived from `seed`.
  std::uint64_t data_seed() const { return derive_seed(seed, streams::split); }
  std::uint64_t subsample_seed() const { return derive_seed(seed, streams::subsample); }
  std::uint64_t latent_seed() const { return derive_seed(seed, streams::export_latents); }
  std::uint64_t audit_seed() const { return derive_seed(seed, streams::audit); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (data_paths.empty()) fail("data.paths is required");
    if (schema_path.empty()) fail("data.schema is required");
    if (!(train_frac > 0.0 && train_frac < 1.0)) fail("data.train_frac must be in (0, 1)");
    if (output_dir.empty()) fail("output.dir must not be empty");
    if (latent_k == 0) fail("latents.k must be positive");
    if (sweep.grid.empty()) fail("sweep.grid must list at least one lambda");
    if (sweep.repeats == 0) fail("sweep.repeats must be positive");
    for (double l : sweep.grid) {
      if (!(l >= 0.0)) fail("sweep.grid values must be non-negative");
    }
    if (inference.adversary.hidden.empty() || predictor.adversary.hidden.empty()) fail("adversary.hidden must not be empty");
    if (inference.adversary.ascent_steps == 0) fail("adversary.ascent_steps must be positive");
    if (!(inference.adversary.lr > 0.0)) fail("adversary.lr must be positive");
    for (double m : inference.mmd_multipliers) {
      if (!(m > 0.0)) fail("mmd.bandwidth_multipliers must be positive");
    }
    if (inference.epochs == 0) fail("inference.epochs must be positive");
    if (predictor.epochs == 0) fail("predictor.epochs must be positive");
    try {
      inference.validate();
      predictor.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) throw ConfigError(key + ": cannot parse '" + v + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(key + ": value must be finite");
  }
  return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  if (!v.empty() && v[0] == '-') throw ConfigError(key + ": must be non-negative");
  return parse_number<std::size_t>(key, v);
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& part : split_list(v, ',')) out.push_back(parse_number<double>(key, part));
  return out;
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split_list(v, ',')) {
    const std::size_t w = parse_size(key, part);
    if (w == 0) throw ConfigError(key + ": layer widths must be positive");
    out.push_back(w);
  }
  return out;
}

inline FairnessMode parse_mode(const std::string& key, const std::string& v) {
  if (v == "dp") return FairnessMode::dp;
  if (v == "eo") return FairnessMode::eo;
  throw ConfigError(key + ": expected dp or eo, got '" + v + "'");
}

}  // namespace detail

// Key table. Each handler parses one value into the config.
inline const std::map<std::string, std::function<void(RunConfig&, const std::string&, const std::string&)>>&
config_keys() {
  using detail::parse_number;
  using detail::parse_size;
  using S = const std::string&;
  static const std::map<std::string, std::function<void(RunConfig&, S, S)>> keys = {
      {"seed", [](RunConfig& c, S k, S v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"data.paths", [](RunConfig& c, S, S v) { c.data_paths = split_list(v, ','); }},
      {"data.schema", [](RunConfig& c, S, S v) { c.schema_path = v; }},
      {"data.subsample", [](RunConfig& c, S k, S v) { c.subsample = parse_size(k, v); }},
      {"data.train_frac", [](RunConfig& c, S k, S v) { c.train_frac = parse_number<double>(k, v); }},
      {"output.dir", [](RunConfig& c, S, S v) { c.output_dir = v; }},
      {"latents.k", [](RunConfig& c, S k, S v) { c.latent_k = parse_size(k, v); }},

      {"inference.d_z", [](RunConfig& c, S k, S v) { c.inference.d_z = parse_size(k, v); }},
      {"inference.lambda_mmd", [](RunConfig& c, S k, S v) { c.inference.lambda_mmd = parse_number<double>(k, v); }},
      {"inference.lambda_inf", [](RunConfig& c, S k, S v) { c.inference.lambda_inf = parse_number<double>(k, v); }},
      {"inference.epochs", [](RunConfig& c, S k, S v) { c.inference.epochs = parse_size(k, v); }},
      {"inference.batch_size", [](RunConfig& c, S k, S v) { c.inference.batch_size = parse_size(k, v); }},
      {"inference.lr", [](RunConfig& c, S k, S v) { c.inference.lr = parse_number<double>(k, v); }},
      {"inference.hidden", [](RunConfig& c, S k, S v) { c.inference.hidden = detail::parse_sizes(k, v); }},
      {"inference.logvar_min", [](RunConfig& c, S k, S v) { c.inference.logvar_min = parse_number<double>(k, v); }},
      {"inference.logvar_max", [](RunConfig& c, S k, S v) { c.inference.logvar_max = parse_number<double>(k, v); }},
      {"inference.audit_epochs", [](RunConfig& c, S k, S v) { c.inference.audit_epochs = parse_size(k, v); }},

      {"mmd.bandwidth_multipliers",
       [](RunConfig& c, S k, S v) { c.inference.mmd_multipliers = detail::parse_doubles(k, v); }},

      // One adversary architecture for both stages.
      {"adversary.hidden",
       [](RunConfig& c, S k, S v) { c.inference.adversary.hidden = c.predictor.adversary.hidden = detail::parse_sizes(k, v); }},
      {"adversary.ascent_steps",
       [](RunConfig& c, S k, S v) {
         c.inference.adversary.ascent_steps = c.predictor.adversary.ascent_steps = parse_size(k, v);
       }},
      {"adversary.lr",
       [](RunConfig& c, S k, S v) { c.inference.adversary.lr = c.predictor.adversary.lr = parse_number<double>(k, v); }},

      {"predictor.mode", [](RunConfig& c, S k, S v) { c.predictor.mode = detail::parse_mode(k, v); }},
      {"predictor.lambda_dp", [](RunConfig& c, S k, S v) { c.predictor.lambda_dp = parse_number<double>(k, v); }},
      {"predictor.lambda_0", [](RunConfig& c, S k, S v) { c.predictor.lambda_0 = parse_number<double>(k, v); }},
      {"predictor.lambda_1", [](RunConfig& c, S k, S v) { c.predictor.lambda_1 = parse_number<double>(k, v); }},
      {"predictor.epochs", [](RunConfig& c, S k, S v) { c.predictor.epochs = parse_size(k, v); }},
      {"predictor.batch_size", [](RunConfig& c, S k, S v) { c.predictor.batch_size = parse_size(k, v); }},
      {"predictor.lr", [](RunConfig& c, S k, S v) { c.predictor.lr = parse_number<double>(k, v); }},
      {"predictor.hidden", [](RunConfig& c, S k, S v) { c.predictor.hidden = detail::parse_sizes(k, v); }},
      {"predictor.audit_epochs", [](RunConfig& c, S k, S v) { c.predictor.audit_epochs = parse_size(k, v); }},

      {"sweep.grid", [](RunConfig& c, S k, S v) { c.sweep.grid = detail::parse_doubles(k, v); }},
      {"sweep.repeats", [](RunConfig& c, S k, S v) { c.sweep.repeats = parse_size(k, v); }},
      {"sweep.objective", [](RunConfig& c, S k, S v) { c.sweep.objective = detail::parse_mode(k, v); }},
  };
  return keys;
}

// Relative paths (data, schema, output dir) resolve against `base_dir`, the
// config file's directory.
inline RunConfig parse_run_config(std::istream& is, const std::string& base_dir = "") {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    const auto& keys = config_keys();
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": '" + key + "' already set on line " +
                        std::to_string(prev->second));
    }
    seen[key] = lineno;
    if (val.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    try {
      it->second(cfg, key, val);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!base_dir.empty()) {
    auto resolve = [&](std::string& p) {
      if (!p.empty() && p[0] != '/') p = base_dir + "/" + p;
    };
    for (auto& p : cfg.data_paths) resolve(p);
    resolve(cfg.schema_path);
    resolve(cfg.output_dir);
  }
  return cfg;
}

// Parses, applies FAIRPROXY_SEED when set, then validates.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  const auto slash = path.find_last_of('/');
  RunConfig cfg = parse_run_config(is, slash == std::string::npos ? "" : path.substr(0, slash));
  if (const char* env = std::getenv("FAIRPROXY_SEED"); env && *env) {
    cfg.seed = detail::parse_number<std::uint64_t>("FAIRPROXY_SEED", trim(env));
  }
  cfg.inference.seed = derive_seed(cfg.seed, streams::init);
  cfg.predictor.seed = derive_seed(cfg.seed, streams::adversary);
  cfg.validate();
  return cfg;
}

}  // namespace fairproxy
