#include <filesystem>
#include <fstream>

#include "ctpanel/config.hpp"
#include "ctpanel/io.hpp"
#include "ctpanel/minitoml.hpp"
#include "doctest.h"

using namespace ctpanel;
namespace fs = std::filesystem;

TEST_CASE("minitoml: sections, scalars, arrays, comments") {
  const auto t = minitoml::Table::parse(R"(
# top comment
title = "demo"  # trailing comment
count = 12
ratio = -3.5e-2
flag = true

[section.sub]
values = [1, 2, 3]
names = ["a", "b"]
matrix = [[1.0, 2.0],
          [3.0, 4.0]]
)");
  CHECK(t.str("title") == "demo");
  CHECK(t.integer("count") == 12);
  CHECK(t.number("ratio") == doctest::Approx(-0.035));
  CHECK(t.boolean("flag"));
  CHECK(t.numbers("section.sub.values") == std::vector<double>({1, 2, 3}));
  CHECK(t.strings("section.sub.names") == std::vector<std::string>({"a", "b"}));
  const auto m = t.matrix("section.sub.matrix");
  REQUIRE(m.size() == 2);
  CHECK(m[1][0] == 3.0);
  CHECK(t.integer_or("missing", 7) == 7);
  CHECK_FALSE(t.has("section.sub.other"));
}

TEST_CASE("minitoml: errors carry the key path or line") {
  CHECK_THROWS_AS(minitoml::Table::parse("x = "), ConfigError);
  CHECK_THROWS_AS(minitoml::Table::parse("x = [1, 2"), ConfigError);
  CHECK_THROWS_AS(minitoml::Table::parse("x = nope"), ConfigError);
  CHECK_THROWS_AS(minitoml::Table::parse("x = 1\nx = 2"), ConfigError);
  const auto t = minitoml::Table::parse("x = 1.5");
  CHECK_THROWS_WITH_AS(t.integer("x"), doctest::Contains("'x'"), ConfigError);
  CHECK_THROWS_WITH_AS(t.str("y"), doctest::Contains("'y'"), ConfigError);
}

TEST_CASE("model config: defaults, overrides and validation") {
  const auto dir = fs::temp_directory_path() / "ctpanel_cfg_test";
  fs::create_directories(dir);
  const auto path = (dir / "model.toml").string();
  {
    std::ofstream out(path);
    out << R"([model]
latents = ["a", "b"]
predictors = ["argument", "suggestion"]
drift = "diagonal"
grouping = "free"

[fit]
starts = 3
seed = 99
)";
  }
  const auto config = load_model_config(path);
  CHECK(config.spec.n_latent == 2);
  CHECK(config.spec.grouping == GroupingMode::Free);
  CHECK(config.fit.starts == 3);
  CHECK(config.fit.seed == 99);
  CHECK(config.report_top_k == 1);

  {
    std::ofstream out(path);
    out << "[model]\ndrift = \"wavy\"\n";
  }
  CHECK_THROWS_AS(load_model_config(path), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("design config: full round trip through simulate") {
  const auto dir = fs::temp_directory_path() / "ctpanel_design_test";
  fs::create_directories(dir);
  const auto path = (dir / "design.toml").string();
  {
    std::ofstream out(path);
    out << R"([design]
n_groups = 2
members_per_group = 2
n_slices = 30
seed = 5

[model]
latents = ["s", "f"]
predictors = ["argument", "suggestion"]

[true_params]
drift_diag = [-0.05, -0.2]
predictor_effects = [[1.5, 0.0], [0.0, 1.2]]
loadings = [[1.0, 1.4], [1.1, 1.3]]
manifest_error_var = 0.25

[true_params.per_group.g2]
drift_diag = [-0.08, -0.3]

[predictor_process.default]
kind = "bernoulli"
p = 0.5
)";
  }
  const auto design = load_sim_design(path);
  CHECK(design.n_groups == 2);
  CHECK(design.true_params.groups[0].drift(0, 0) == doctest::Approx(-0.05));
  CHECK(design.true_params.groups[1].drift(0, 0) == doctest::Approx(-0.08));
  CHECK(design.true_params.groups[1].loadings(0, 1) == doctest::Approx(1.3));
  const auto panels = simulate(design);
  CHECK(panels.size() == 2);
  CHECK(panels[0].members.size() == 2);
  CHECK(panels[0].members[0].records.size() == 30);
  fs::remove_all(dir);
}

TEST_CASE("design config: missing generator is reported with the channel") {
  const auto dir = fs::temp_directory_path() / "ctpanel_design_err";
  fs::create_directories(dir);
  const auto path = (dir / "design.toml").string();
  {
    std::ofstream out(path);
    out << R"([design]
n_groups = 1
members_per_group = 1
n_slices = 10

[model]
latents = ["s"]
predictors = ["argument"]

[true_params]
drift_diag = [-0.1]
predictor_effects = [[1.0]]
loadings = [[1.0]]

[predictor_process.suggestion]
kind = "bernoulli"
)";
  }
  CHECK_THROWS_WITH_AS(load_sim_design(path), doctest::Contains("argument"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("fit json: write -> read round trip preserves the result") {
  FitResult result;
  result.spec.n_latent = 2;
  result.spec.latent_names = {"a", "b"};
  result.spec.predictor_channels = {"argument"};
  result.spec.fill_defaults();
  result.mode = GroupingMode::Constrained;
  result.group_ids = {"g1"};
  CtGroupParams g;
  g.drift = Eigen::MatrixXd::Zero(2, 2);
  g.drift(0, 0) = -0.25;
  g.drift(1, 1) = -1.5;
  g.cont_intercept = Eigen::VectorXd::Zero(2);
  g.diffusion_chol = Eigen::MatrixXd::Identity(2, 2);
  g.predictor_effects = Eigen::MatrixXd::Constant(2, 1, 0.7);
  g.loadings = Eigen::MatrixXd::Constant(1, 2, 1.25);
  g.manifest_intercept = Eigen::VectorXd::Constant(1, 0.5);
  g.manifest_error_var = Eigen::VectorXd::Constant(1, 0.3);
  result.params.groups.push_back(g);
  result.loglik = -123.456789;
  result.n_free_params = 7;
  result.aic = aic(result.loglik, 7);
  result.converged = true;
  result.parameters.push_back({"drift.a", -0.25, 0.05});
  result.parameters.push_back({"loading.curiosity.b", 1.25, std::nullopt});
  StdEffect e;
  e.source = "argument";
  e.target = "a";
  e.per_group = {0.4};
  e.mean = 0.4;
  result.standardized.effects.push_back(e);

  const auto path = (fs::temp_directory_path() / "ctpanel_fit_roundtrip.json").string();
  write_fit_json(result, path);
  const auto back = read_fit_json(path);
  CHECK(back.loglik == result.loglik);
  CHECK(back.n_free_params == 7);
  CHECK(back.aic == result.aic);
  CHECK(back.params.groups[0].drift(1, 1) == -1.5);
  CHECK(back.params.groups[0].loadings(0, 0) == 1.25);
  CHECK(back.parameters[0].std_error.has_value());
  CHECK_FALSE(back.parameters[1].std_error.has_value());
  CHECK(back.standardized.effects[0].mean == 0.4);
  CHECK(back.spec.latent_names == result.spec.latent_names);
  fs::remove(path);
}

TEST_CASE("session dir: missing files are listed together") {
  const auto dir = fs::temp_directory_path() / "ctpanel_empty_session";
  fs::create_directories(dir);
  try {
    read_session_dir(dir.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("session.json") != std::string::npos);
    CHECK(what.find("turns.csv") != std::string::npos);
    CHECK(what.find("frames.jsonl") != std::string::npos);
    CHECK(what.find("verbal.csv") != std::string::npos);
    CHECK(what.find("ratings.csv") != std::string::npos);
  }
  fs::remove_all(dir);
}
