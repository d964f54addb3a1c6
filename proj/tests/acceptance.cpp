// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.
//
// Environment:
//   FAIRPROXY_ADULT_DIR   directory with adult.data / adult.test
//   FAIRPROXY_SCHEMA_DIR  directory with adult.schema
//   FAIRPROXY_CLI         path of the fairproxy executable (criterion 10)
//   FAIRPROXY_WORK_DIR    scratch directory (default: system temp)

#include "fairproxy/pipeline.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

using namespace fairproxy;
namespace ft = fairproxy::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ---- 1: gradients of random small networks ------------------------------

Outcome gradients() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> width(1, 6), depth(1, 3), kind(0, 2), act(0, 3);
  double worst = 0.0;
  for (int net_i = 0; net_i < 25; ++net_i) {
    std::vector<std::size_t> widths{width(rng) + 1};
    for (std::size_t l = depth(rng); l > 0; --l) widths.push_back(width(rng) + 1);
    widths.push_back(width(rng));
    const auto activation = static_cast<Activation>(act(rng));
    Mlp net("net" + std::to_string(net_i), widths, activation, rng);
    const std::size_t n = 6;
    Tensor x = ft::random_tensor(n, widths.front(), rng);
    Tensor w = ft::random_tensor(n, widths.back(), rng);
    Tensor t(n, widths.back());
    std::bernoulli_distribution coin(0.5);
    for (auto& v : t.data()) v = coin(rng) ? 1.0 : 0.0;
    const std::size_t loss_kind = kind(rng);
    auto build = [&](Graph& g) {
      Var out = net.forward(g, g.constant(x));
      if (loss_kind == 0) return ad::sum(ad::mul(out, g.constant(w)));
      if (loss_kind == 1) return ad::bce_with_logits(out, t);
      return ad::half_squared_error(out, w);
    };
    auto loss = [&] {
      Graph g;
      return build(g).value().item();
    };
    auto analytic = [&] {
      Graph g;
      g.backward(build(g));
    };
    worst = std::max(worst, ft::max_fd_relative_error(net.params(), loss, analytic));
  }
  return {worst <= 1e-4, "max relative error " + std::to_string(worst) + " over 25 networks"};
}

// ---- 2: neural estimate vs exact oracle on 8x8 joints -------------------

Outcome hgr_discrete() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int ok = 0;
  for (int j = 0; j < 20; ++j) {
    const Tensor pmf = ft::dirichlet_table(8, 8, 0.5, rng);
    const auto s = ft::sample_pairs(pmf, 20000, rng);
    const double oracle = hgr_oracle(DiscreteJoint(pmf));
    const double est = audit_hgr(ft::one_hot(s.a, 8), ft::one_hot(s.b, 8), HgrConfig{}, 5, 512, 100 + j);
    const double err = std::abs(est - oracle);
    worst = std::max(worst, err);
    ok += err <= 0.05;
  }
  return {ok == 20, std::to_string(ok) + "/20 within 0.05, worst |error| " + fmt(worst)};
}

// ---- 3: Theorem 1 on random three-way joints ----------------------------

Outcome theorem1() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> card(2, 4);
  int ok = 0;
  double worst = 1.0;
  for (int j = 0; j < 50; ++j) {
    const std::size_t ky = card(rng), ks = card(rng), kz = card(rng);
    const Tensor flat = ft::dirichlet_table(ky, ks * kz, 0.7, rng);
    std::vector<double> p(flat.data().begin(), flat.data().end());
    const auto r = theorem1_check(Joint3(ky, ks, kz, p));
    ok += r.holds;
    worst = std::min(worst, r.hgr_full - r.hgr_sub);
  }
  return {ok == 50, std::to_string(ok) + "/50 hold, min HGR(Y,(S,Z)) - HGR(Y,S) = " + std::to_string(worst)};
}

// ---- 4: Gaussian HGR ----------------------------------------------------

Outcome hgr_gaussian() {
  std::mt19937_64 rng(8);
  const auto p = ft::gaussian_pairs(0.8, 20000, rng);
  const double est = audit_hgr(p.u, p.v, HgrConfig{}, 5, 512, 8);
  const double oracle = hgr_oracle(DiscreteJoint(ft::discretized_gaussian(0.8, 32)));
  return {std::abs(est - 0.8) <= 0.05, "estimate " + fmt(est) + ", 32-bin oracle " + fmt(oracle)};
}

// ---- 5: MMD properties --------------------------------------------------

Outcome mmd_properties() {
  std::mt19937_64 rng(5);
  const Tensor a = ft::random_tensor(400, 3, rng);
  const double same = std::abs(mmd2_value(a, a, MmdConfig{{0.5, 1.0, 2.0}}));
  int wins = 0;
  for (int r = 0; r < 20; ++r) {
    std::mt19937_64 g(500 + r);
    std::normal_distribution<double> nd(0.0, 1.0);
    Tensor x(500, 1), y(500, 1), z(500, 1);
    for (auto& v : x.data()) v = nd(g);
    for (auto& v : y.data()) v = 3.0 + nd(g);
    for (auto& v : z.data()) v = nd(g);
    wins += mmd2_value(x, y, MmdConfig{{1.0}}) > mmd2_value(x, z, MmdConfig{{1.0}});
  }
  return {same <= 1e-6 && wins == 20, "|mmd2(X,X)| " + std::to_string(same) + ", shift wins " + std::to_string(wins) + "/20"};
}

// ---- 6-9: Adult -----------------------------------------------------------

// Desk-scale setup shared by the Adult criteria.
struct AdultBench {
  RunConfig cfg;
  pipeline::PreparedData data;
  std::map<std::pair<double, std::size_t>, std::shared_ptr<SrcvaeModel>> models;   // (lambda_inf, d_z)
  std::map<std::pair<double, std::size_t>, double> final_hgr, audit;
  std::size_t repeats = 3;

  explicit AdultBench(const std::string& dir) {
    cfg.seed = 1;
    cfg.data_paths = {dir + "/adult.data", dir + "/adult.test"};
    cfg.schema_path = ft::schema_dir() + "/adult.schema";
    cfg.subsample = 10000;
    cfg.inference.epochs = 20;
    cfg.predictor.epochs = 20;
    cfg.inference.seed = derive_seed(cfg.seed, streams::init);
    cfg.predictor.seed = derive_seed(cfg.seed, streams::adversary);
    data = pipeline::load_data(cfg);
  }

  SrcvaeModel& model(double lambda_inf, std::size_t dz) {
    auto key = std::make_pair(lambda_inf, dz);
    if (!models.count(key)) {
      InferenceConfig ic = cfg.inference;
      ic.lambda_inf = lambda_inf;
      ic.d_z = dz;
      auto t = train_inference(data.train, ic);
      models[key] = t.model;
      final_hgr[key] = t.history.back().hgr_xc_z;
      audit[key] = audit_leakage(*t.model, data.train, cfg.audit_seed());
    }
    return *models[key];
  }

  struct Point {
    double lambda, accuracy, p_rule, dm;
  };
  std::map<std::string, std::vector<Point>> sweeps;

  // Mean test metrics over repeats for each lambda.
  const std::vector<Point>& sweep(FairnessMode mode, std::size_t dz, const std::vector<double>& grid) {
    const std::string key = std::string(to_string(mode)) + std::to_string(dz);
    if (sweeps.count(key)) return sweeps[key];
    const ProxyBank bank = export_latents(model(0.2, dz), data.train, cfg.latent_k, cfg.latent_seed()).bank;
    std::vector<Point> out;
    for (double lambda : grid) {
      Point p{lambda, 0, 0, 0};
      for (std::size_t r = 0; r < repeats; ++r) {
        PredictorConfig pc = cfg.predictor;
        pc.seed = derive_seed(cfg.predictor.seed, 1000 + r);
        const auto t = mode == FairnessMode::dp ? train_dp(data.train, bank, lambda, pc)
                                                : train_eo(data.train, bank, lambda, lambda, pc);
        const auto rep = evaluate(*t.model, data.test);
        p.accuracy += rep.accuracy / static_cast<double>(repeats);
        p.p_rule += rep.p_rule / static_cast<double>(repeats);
        p.dm += rep.dm / static_cast<double>(repeats);
      }
      std::cout << "  [" << to_string(mode) << " d_z=" << dz << "] lambda " << lambda << ": accuracy " << fmt(p.accuracy)
                << " p_rule " << fmt(p.p_rule) << " dm " << fmt(p.dm) << std::endl;
      out.push_back(p);
    }
    return sweeps[key] = out;
  }
};

std::unique_ptr<AdultBench> bench;

AdultBench* adult() {
  if (!bench) {
    const std::string dir = ft::adult_dir();
    if (dir.empty()) return nullptr;
    bench = std::make_unique<AdultBench>(dir);
  }
  return bench.get();
}

const std::vector<double> kDpGrid{0.0, 0.24, 0.35, 0.45, 0.48, 0.5};

Outcome inference_leakage() {
  AdultBench* b = adult();
  if (!b) return {false, "Adult data not found"};
  b->model(0.0, 5);
  b->model(0.2, 5);
  const double h0 = b->final_hgr[{0.0, 5}], h2 = b->final_hgr[{0.2, 5}];
  return {h0 >= 0.6 && h2 <= 0.35, "final HGR(x_c,z) " + fmt(h0) + " at lambda_inf=0, " + fmt(h2) +
                                        " at 0.2 (held-out audit " + fmt(b->audit[{0.0, 5}]) + " / " +
                                        fmt(b->audit[{0.2, 5}]) + ")"};
}

Outcome dp_tradeoff() {
  AdultBench* b = adult();
  if (!b) return {false, "Adult data not found"};
  const auto& s = b->sweep(FairnessMode::dp, 5, kDpGrid);
  const auto& base = s.front();
  const auto& top = s.back();
  bool monotone = true;
  for (std::size_t i = 1; i < s.size(); ++i) monotone &= s[i].p_rule >= s[i - 1].p_rule - 0.05;
  const bool base_ok = base.accuracy >= 0.83 && base.p_rule >= 0.20 && base.p_rule <= 0.45;
  const bool top_ok = top.p_rule >= 0.70 && base.accuracy - top.accuracy <= 0.06;
  return {base_ok && top_ok && monotone,
          "lambda=0: accuracy " + fmt(base.accuracy) + " p_rule " + fmt(base.p_rule) + "; lambda=0.5: p_rule " +
              fmt(top.p_rule) + " accuracy drop " + fmt(base.accuracy - top.accuracy) +
              (monotone ? "; monotone" : "; not monotone")};
}

Outcome eo_tradeoff() {
  AdultBench* b = adult();
  if (!b) return {false, "Adult data not found"};
  const auto& s = b->sweep(FairnessMode::eo, 5, {0.0, 0.3, 0.6});
  const auto& base = s.front();
  const auto& top = s.back();
  const bool ok = top.dm <= 0.5 * base.dm && base.accuracy - top.accuracy <= 0.08;
  return {ok, "DM " + fmt(base.dm) + " -> " + fmt(top.dm) + ", accuracy drop " + fmt(base.accuracy - top.accuracy)};
}

// Accuracy where the (lambda-ordered) sweep first reaches the target
// P-rule, linearly interpolated; nullopt if it never does.
std::optional<double> accuracy_at(const std::vector<AdultBench::Point>& s, double target) {
  if (s.front().p_rule >= target) return s.front().accuracy;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].p_rule >= target && s[i - 1].p_rule < target) {
      const double t = (target - s[i - 1].p_rule) / (s[i].p_rule - s[i - 1].p_rule);
      return s[i - 1].accuracy + t * (s[i].accuracy - s[i - 1].accuracy);
    }
  }
  return std::nullopt;
}

Outcome proxy_dimension() {
  AdultBench* b = adult();
  if (!b) return {false, "Adult data not found"};
  const auto a5 = accuracy_at(b->sweep(FairnessMode::dp, 5, kDpGrid), 0.8);
  const auto a1 = accuracy_at(b->sweep(FairnessMode::dp, 1, kDpGrid), 0.8);
  if (!a5 || !a1) {
    return {false, std::string("P-rule 0.8 not reached by the ") + (!a5 && !a1 ? "d_z=5 and d_z=1 sweeps" : !a5 ? "d_z=5 sweep" : "d_z=1 sweep")};
  }
  return {*a5 >= *a1 - 0.005, "accuracy at P-rule 0.8: d_z=5 " + fmt(*a5) + ", d_z=1 " + fmt(*a1)};
}

// ---- 10: CLI determinism --------------------------------------------------

int run(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Outcome determinism() {
  const char* cli = std::getenv("FAIRPROXY_CLI");
  if (!cli || !fs::exists(cli)) return {false, "FAIRPROXY_CLI not set"};
  const char* wd = std::getenv("FAIRPROXY_WORK_DIR");
  const fs::path root = fs::path(wd ? wd : fs::temp_directory_path().string()) / "fairproxy_determinism";
  fs::remove_all(root);
  const std::vector<std::string> commands{"prepare-data", "train-inference", "export-latents", "train-predictor",
                                          "evaluate", "sweep"};
  for (const char* side : {"a", "b"}) {
    const fs::path dir = root / side;
    fs::create_directories(dir);
    if (run(std::string(cli) + " make-synthetic -o " + dir.string() + " -n 1500 --seed 11") != 0) {
      return {false, "make-synthetic failed"};
    }
    std::ofstream(dir / "run.cfg") << "seed = 3\n"
                                      "data.paths = synthetic_seed11.csv\n"
                                      "data.schema = synthetic_seed11.schema\n"
                                      "output.dir = out\n"
                                      "inference.epochs = 3\n"
                                      "inference.audit_epochs = 2\n"
                                      "latents.k = 20\n"
                                      "predictor.epochs = 3\n"
                                      "predictor.audit_epochs = 2\n"
                                      "predictor.lambda_dp = 0.5\n"
                                      "sweep.grid = 0, 0.5\n"
                                      "sweep.repeats = 2\n";
    for (const auto& c : commands) {
      const int rc = run(std::string(cli) + " " + c + " -c " + (dir / "run.cfg").string());
      if (rc != 0) return {false, c + " exited with " + std::to_string(rc)};
    }
  }
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path other = root / "b" / fs::relative(e.path(), root / "a");
    ++files;
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      ++differ;
      std::cout << "  differs: " << fs::relative(e.path(), root / "a").string() << '\n';
    }
  }
  return {differ == 0 && files > 10, std::to_string(files) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  log::set_level(log::Level::quiet);
  const std::vector<std::pair<int, Outcome (*)()>> criteria{
      {1, gradients},  {2, hgr_discrete},      {3, theorem1},    {4, hgr_gaussian},    {5, mmd_properties},
      {6, inference_leakage}, {7, dp_tradeoff}, {8, eo_tradeoff}, {9, proxy_dimension}, {10, determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all_pass &= o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << fmt(secs, 1)
              << " s]" << std::endl;
  }
  return all_pass ? 0 : 1;
}
