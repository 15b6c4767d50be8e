#include <gtest/gtest.h>

#include "uq/config.hpp"
#include "uq/pipeline.hpp"

using namespace uq;

TEST(Toml, ScalarsTablesAndArrays) {
  const auto doc = parse_toml(R"(
# leading comment
seed = 42
name = "a \"quoted\" string"  # trailing comment
ratio = -1.5e-3
flag = true

[outer.inner]
list = [1, 2,
        3]
floats = [0.5, 1.0]
)");
  EXPECT_EQ(doc["seed"].get<std::uint64_t>(), 42u);
  EXPECT_EQ(doc["name"].get<std::string>(), "a \"quoted\" string");
  EXPECT_DOUBLE_EQ(doc["ratio"].get<double>(), -1.5e-3);
  EXPECT_TRUE(doc["flag"].get<bool>());
  EXPECT_EQ(doc["outer"]["inner"]["list"].size(), 3u);
  EXPECT_EQ(doc["outer"]["inner"]["list"][2].get<int>(), 3);
  EXPECT_TRUE(doc["outer"]["inner"]["floats"][1].is_number_float());
}

TEST(Toml, SyntaxErrors) {
  EXPECT_THROW(parse_toml("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_toml("[t]\n[t]\n"), ConfigError);
  EXPECT_THROW(parse_toml("a = \"unterminated\n"), ConfigError);
  EXPECT_THROW(parse_toml("just words\n"), ConfigError);
  EXPECT_THROW(parse_toml("a = [1, 2\n"), ConfigError);
}

TEST(RunConfig, MinimalConfigResolves) {
  const auto c = parse_run_config_text("seed = 7\n[problem]\nid = \"sine_regression\"\n[inference]\nmethod = \"dens\"\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.resolved_data_seed(), 7u);
  EXPECT_EQ(c.inference.method, Method::Dens);
  EXPECT_EQ(c.inference.seed, 7u);
  EXPECT_EQ(c.model.family, Family::Trainable);
  EXPECT_EQ(c.model.surrogate, "fnn");
  EXPECT_FALSE(c.calibration);
}

TEST(RunConfig, DefaultSurrogates) {
  EXPECT_EQ(default_surrogate("antiderivative", Family::Trainable), "deeponet");
  EXPECT_EQ(default_surrogate("sine_regression", Family::Samplable), "bnn");
  EXPECT_EQ(default_surrogate("kdv", Family::Trainable), "fnn");
}

TEST(RunConfig, UnknownKeysAreErrors) {
  EXPECT_THROW(parse_run_config_text("[problem]\nid = \"kdv\"\n[inference]\nmethd = \"hmc\"\n"), ConfigError);
  EXPECT_THROW(parse_run_config_text("[problem]\nid = \"kdv\"\n[extras]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config_text("[problem]\nid = \"kdv\"\n[inference]\nmethod = \"nuts\"\n"), ConfigError);
  EXPECT_THROW(parse_run_config_text("[problem]\nid = \"kdv\"\n[inference]\nstep_size = \"big\"\n"), ConfigError);
  EXPECT_THROW(parse_run_config_text("[inference]\nmethod = \"hmc\"\n"), ConfigError);
}

TEST(RunConfig, UnknownProblemNamesTheId) {
  try {
    parse_run_config_text("[problem]\nid = \"heat_equation\"\n");
    FAIL() << "expected UnknownProblem";
  } catch (const UnknownProblem& e) {
    EXPECT_NE(std::string(e.what()).find("heat_equation"), std::string::npos);
  }
}

TEST(RunConfig, CalibrationNeedsSplit) {
  EXPECT_THROW(parse_run_config_text("[problem]\nid = \"kdv\"\n[calibration]\nenabled = true\n"), ConfigError);
  const auto c = parse_run_config_text(
      "[problem]\nid = \"kdv\"\n[calibration]\nenabled = true\nsplit_fraction = 0.25\n");
  EXPECT_TRUE(c.calibration);
  EXPECT_EQ(c.split_fraction, 0.25);
}

TEST(RunConfig, ResolvedEchoRoundTrips) {
  const auto c = parse_run_config_text(R"(
seed = 3
[problem]
id = "diffusion_reaction_inverse"
seed = 11
[surrogate]
hidden = [16, 8]
kr_prior = "lognormal"
prior_std = 0.7
[inference]
method = "mala"
n_samples = 123
burn_in = 17
step_size = 0.000123456789012345
init = "prior"
[loss_weights]
f = 2.5
[calibration]
enabled = true
split_fraction = 0.1
[output]
directory = "some/where"
grid_size = 50
)");
  EXPECT_EQ(c.resolved_data_seed(), 11u);
  EXPECT_EQ(c.model.hidden, (std::vector<int>{16, 8}));
  const std::string echo = to_toml(c);
  const auto back = parse_run_config_text(echo);
  EXPECT_EQ(to_toml(back), echo);
  EXPECT_EQ(back.inference.step_size, c.inference.step_size);
  EXPECT_EQ(back.inference.burn_in, c.inference.burn_in);
  EXPECT_EQ(back.model.weights.f, 2.5);
  EXPECT_EQ(back.output_dir, c.output_dir);
}

TEST(RunConfig, MissingFileIsIoError) {
  EXPECT_THROW(load_run_config("/nonexistent/dir/run.toml"), IoError);
}

TEST(Pipeline, GridRows) {
  EXPECT_EQ(grid_rows(5, 0), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(grid_rows(5, 3), (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_THROW(grid_rows(5, 6), ConfigError);
}

TEST(Pipeline, SamplesCsvLayout) {
  PosteriorSamples s;
  s.method = Method::Hmc;
  s.seed = 4;
  s.n_params = 2;
  s.acceptance_rate = 0.5;
  s.values = {0.1, 1.0 / 3.0, -2.0, 1e-300};
  const auto csv = samples_csv(s, {"u.0", "u.1"});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "# method=hmc seed=4 acceptance_rate=0.5");
  EXPECT_NE(csv.find("\nu.0,u.1\n"), std::string::npos);
  EXPECT_NE(csv.find("0.33333333333333331"), std::string::npos);
}

TEST(Pipeline, CatalogListing) {
  const std::string listing = catalog_listing();
  EXPECT_EQ(listing, catalog_listing());
  EXPECT_NE(listing.find("sine_regression"), std::string::npos);
  for (const char* m : {"hmc", "mala", "ld", "mfvi", "mcd", "dens", "sens", "la"}) {
    EXPECT_NE(listing.find(std::string("  ") + m), std::string::npos) << m;
  }
}
