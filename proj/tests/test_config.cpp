#include "fairproxy/config.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fairproxy;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text, const std::string& base = "") {
  std::istringstream is(text);
  return parse_run_config(is, base);
}

const char* kMinimal = "data.paths = a.csv, b.csv\ndata.schema = s.schema\n";

}  // namespace

TEST(Config, ParsesEveryKnownKind) {
  const RunConfig c = parse(std::string(kMinimal) +
                            "# comment\n"
                            "seed = 42\n"
                            "data.subsample = 1000\n"
                            "inference.hidden = 32, 16\n"
                            "mmd.bandwidth_multipliers = 0.5, 2\n"
                            "adversary.lr = 0.001\n"
                            "predictor.mode = eo\n"
                            "predictor.lambda_0 = 0.6\n"
                            "sweep.grid = 0, 0.3\n"
                            "sweep.objective = eo\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.data_paths, (std::vector<std::string>{"a.csv", "b.csv"}));
  EXPECT_EQ(c.subsample, 1000u);
  EXPECT_EQ(c.inference.hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(c.inference.mmd_multipliers, (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(c.inference.adversary.lr, 0.001);
  EXPECT_EQ(c.predictor.adversary.lr, 0.001);
  EXPECT_EQ(c.predictor.mode, FairnessMode::eo);
  EXPECT_EQ(c.predictor.lambda_0, 0.6);
  EXPECT_EQ(c.sweep.grid, (std::vector<double>{0.0, 0.3}));
  EXPECT_EQ(c.sweep.objective, FairnessMode::eo);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, DefaultsFollowTheReferenceSetup) {
  const RunConfig c = parse(kMinimal);
  EXPECT_EQ(c.latent_k, 200u);
  EXPECT_EQ(c.sweep.repeats, 5u);
  EXPECT_EQ(c.sweep.grid, (std::vector<double>{0.0, 0.24, 0.35, 0.45, 0.48, 0.5}));
  EXPECT_EQ(c.inference.d_z, 5u);
  EXPECT_EQ(c.inference.lambda_inf, 0.2);
  EXPECT_EQ(c.inference.adversary.ascent_steps, 10u);
}

TEST(Config, RejectsUnknownDuplicateAndMalformedLines) {
  EXPECT_THROW(parse("inference.lamda_inf = 0.2\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse("seed 1\n"), ConfigError);
  EXPECT_THROW(parse("seed =\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1x\n"), ConfigError);
  EXPECT_THROW(parse("data.subsample = -5\n"), ConfigError);
  EXPECT_THROW(parse("inference.lr = nan\n"), ConfigError);
  EXPECT_THROW(parse("predictor.mode = fair\n"), ConfigError);
  EXPECT_THROW(parse("inference.hidden = 8, 0\n"), ConfigError);
  try {
    parse("seed = 1\n\nbogus = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Config, ValidationCatchesOutOfRangeValues) {
  auto bad = [](const std::string& extra) {
    RunConfig c = parse(std::string(kMinimal) + extra);
    EXPECT_THROW(c.validate(), ConfigError) << extra;
  };
  bad("data.train_frac = 1.0\n");
  bad("inference.lr = 0\n");
  bad("inference.lambda_inf = -1\n");
  bad("predictor.batch_size = 8\n");
  bad("latents.k = 0\n");
  bad("sweep.repeats = 0\n");
  bad("sweep.grid = 0, -0.1\n");
  bad("mmd.bandwidth_multipliers = 1, 0\n");
  bad("inference.logvar_min = 4\n");
  EXPECT_THROW(parse("seed = 1\n").validate(), ConfigError);  // no data
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
  const RunConfig c = parse(std::string(kMinimal) + "output.dir = out\n", "/etc/run");
  EXPECT_EQ(c.data_paths[0], "/etc/run/a.csv");
  EXPECT_EQ(c.schema_path, "/etc/run/s.schema");
  EXPECT_EQ(c.output_dir, "/etc/run/out");
  EXPECT_EQ(parse("data.schema = /abs/s.schema\n", "/etc/run").schema_path, "/abs/s.schema");
}

TEST(Config, SeedEnvironmentOverridesFile) {
  const fs::path p = fs::temp_directory_path() / "fairproxy_config_seed_test.cfg";
  std::ofstream(p) << kMinimal << "seed = 5\n";
  unsetenv("FAIRPROXY_SEED");
  const RunConfig a = load_run_config(p.string());
  EXPECT_EQ(a.seed, 5u);
  setenv("FAIRPROXY_SEED", "99", 1);
  const RunConfig b = load_run_config(p.string());
  EXPECT_EQ(b.seed, 99u);
  EXPECT_NE(a.inference.seed, b.inference.seed);
  EXPECT_NE(a.data_seed(), b.data_seed());
  setenv("FAIRPROXY_SEED", "abc", 1);
  EXPECT_THROW(load_run_config(p.string()), ConfigError);
  unsetenv("FAIRPROXY_SEED");
  fs::remove(p);
}
