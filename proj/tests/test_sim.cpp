#include <cmath>

#include "ctpanel/sim.hpp"
#include "doctest.h"

using namespace ctpanel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CtModelSpec scalar_spec() {
  CtModelSpec spec;
  spec.n_latent = 1;
  spec.latent_names = {"l1"};
  spec.predictor_channels = {"argument"};
  spec.fill_defaults();
  return spec;
}

CtGroupParams scalar_params(double a, double loading, double error_var,
                            double diffusion = 1.0) {
  CtGroupParams g;
  g.drift = MatrixXd::Constant(1, 1, a);
  g.cont_intercept = VectorXd::Zero(1);
  g.diffusion_chol = MatrixXd::Constant(1, 1, diffusion);
  g.predictor_effects = MatrixXd::Zero(1, 1);
  g.loadings = MatrixXd::Constant(1, 1, loading);
  g.manifest_intercept = VectorXd::Zero(1);
  g.manifest_error_var = VectorXd::Constant(1, error_var);
  return g;
}

SimDesign scalar_design(int slices, std::uint64_t seed) {
  SimDesign design;
  design.n_groups = 1;
  design.members_per_group = 1;
  design.n_slices = slices;
  design.model = scalar_spec();
  design.true_params.groups.push_back(scalar_params(-0.5, 1.0, 0.0));
  PredictorGenSpec gen;
  gen.kind = PredictorGenSpec::Kind::Bernoulli;
  gen.p = 0.0;  // inert predictor channel
  design.predictor_process = {gen};
  design.seed = seed;
  return design;
}

std::vector<double> manifest_series(const BehaviorPanel& panel) {
  std::vector<double> y;
  for (const auto& rec : panel.members[0].records) y.push_back(*rec.curiosity);
  return y;
}

}  // namespace

TEST_CASE("simulate: fixed seed reproduces byte-identical panels") {
  const auto a = simulate(scalar_design(200, 42));
  const auto b = simulate(scalar_design(200, 42));
  REQUIRE(a.size() == b.size());
  const auto ya = manifest_series(a[0]), yb = manifest_series(b[0]);
  CHECK(ya == yb);  // exact equality, not approximate
  const auto c = simulate(scalar_design(200, 43));
  CHECK(manifest_series(c[0]) != ya);
}

TEST_CASE("simulate: noiseless degenerate system is identically zero") {
  SimDesign design = scalar_design(50, 7);
  design.true_params.groups[0] = scalar_params(-0.5, 1.0, 0.0, 0.0);
  design.true_params.groups[0].init_mean = VectorXd::Zero(1);
  design.true_params.groups[0].init_cov = MatrixXd::Zero(1, 1);
  const auto panels = simulate(design);
  for (double y : manifest_series(panels[0])) CHECK(y == 0.0);
}

TEST_CASE("simulate: OU lag-1 autocorrelation matches exp(a dt)") {
  // a = -0.5, dt = 10 -> autocorrelation e^{-5}; loading 1, no error, so the
  // manifest series is the latent path itself.
  const auto panels = simulate(scalar_design(100000, 99));
  const auto y = manifest_series(panels[0]);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + 1 < y.size(); ++t)
    num += (y[t] - mean) * (y[t + 1] - mean);
  for (double v : y) den += (v - mean) * (v - mean);
  const double autocorr = num / den;
  CHECK(std::abs(autocorr - std::exp(-5.0)) < 0.01);

  // Empirical stationary variance converges to q / (-2a) = 1.
  const double variance = den / static_cast<double>(y.size());
  CHECK(std::abs(variance - 1.0) < 0.02);
}

TEST_CASE("simulate: ordinal manifest mode lands in {0,1,2}") {
  SimDesign design = scalar_design(300, 5);
  design.ordinal_manifest = true;
  design.true_params.groups[0] = scalar_params(-0.5, 1.0, 0.25);
  design.true_params.groups[0].manifest_intercept = VectorXd::Constant(1, 1.0);
  const auto panels = simulate(design);
  int seen[3] = {0, 0, 0};
  for (double y : manifest_series(panels[0])) {
    REQUIRE((y == 0.0 || y == 1.0 || y == 2.0));
    ++seen[static_cast<int>(y)];
  }
  CHECK(seen[0] > 0);
  CHECK(seen[1] > 0);
  CHECK(seen[2] > 0);
}

TEST_CASE("simulate: validation rejects inconsistent designs") {
  SimDesign design = scalar_design(10, 1);
  design.n_groups = 2;  // but only one group of params
  CHECK_THROWS_AS(simulate(design), ConfigError);
  design = scalar_design(10, 1);
  design.predictor_process.clear();
  CHECK_THROWS_AS(simulate(design), ConfigError);
  design = scalar_design(10, 1);
  design.true_params.groups[0].drift(0, 0) = 0.3;  // unstable
  CHECK_THROWS_AS(simulate(design), NumericalError);
}

TEST_CASE("canonicalize: flips negative-loading latents consistently") {
  CtModelSpec spec;
  spec.n_latent = 2;
  spec.latent_names = {"l1", "l2"};
  spec.predictor_channels = {"argument"};
  spec.fill_defaults();

  CtParams params;
  CtGroupParams g;
  g.drift = MatrixXd::Zero(2, 2);
  g.drift(0, 0) = -0.4;
  g.drift(1, 1) = -0.9;
  g.cont_intercept = VectorXd::Zero(2);
  g.diffusion_chol = MatrixXd::Identity(2, 2);
  g.predictor_effects = MatrixXd::Zero(2, 1);
  g.predictor_effects(0, 0) = 0.8;
  g.predictor_effects(1, 0) = -0.3;
  g.loadings = MatrixXd::Zero(1, 2);
  g.loadings(0, 0) = -1.2;  // flips
  g.loadings(0, 1) = 0.9;   // stays
  g.manifest_intercept = VectorXd::Zero(1);
  g.manifest_error_var = VectorXd::Constant(1, 0.2);
  params.groups.push_back(g);

  canonicalize_latent_signs(params);
  CHECK(params.groups[0].loadings(0, 0) == doctest::Approx(1.2));
  CHECK(params.groups[0].predictor_effects(0, 0) == doctest::Approx(-0.8));
  CHECK(params.groups[0].loadings(0, 1) == doctest::Approx(0.9));
  CHECK(params.groups[0].predictor_effects(1, 0) == doctest::Approx(-0.3));
  CHECK(params.groups[0].drift(0, 0) == doctest::Approx(-0.4));
}

TEST_CASE("align_to_truth: undoes a latent permutation and sign flip") {
  CtModelSpec spec;
  spec.n_latent = 2;
  spec.latent_names = {"l1", "l2"};
  spec.predictor_channels = {"argument", "suggestion"};
  spec.fill_defaults();

  auto make = [&](double a0, double a1, double l0, double l1, double m00, double m11) {
    CtParams params;
    CtGroupParams g;
    g.drift = MatrixXd::Zero(2, 2);
    g.drift(0, 0) = a0;
    g.drift(1, 1) = a1;
    g.cont_intercept = VectorXd::Zero(2);
    g.diffusion_chol = MatrixXd::Identity(2, 2);
    g.predictor_effects = MatrixXd::Zero(2, 2);
    g.predictor_effects(0, 0) = m00;
    g.predictor_effects(1, 1) = m11;
    g.loadings = MatrixXd::Zero(1, 2);
    g.loadings(0, 0) = l0;
    g.loadings(0, 1) = l1;
    g.manifest_intercept = VectorXd::Zero(1);
    g.manifest_error_var = VectorXd::Constant(1, 0.2);
    params.groups.push_back(g);
    return params;
  };

  const CtParams truth = make(-0.3, -1.1, 1.4, 0.7, 0.9, -0.5);
  // Same model with latents swapped and the (new) second latent sign-flipped.
  CtParams fitted = make(-1.1, -0.3, 0.7, -1.4, 0.0, 0.0);
  fitted.groups[0].predictor_effects(0, 1) = -0.5;
  fitted.groups[0].predictor_effects(1, 0) = -0.9;

  align_to_truth(fitted, truth);
  CHECK(fitted.groups[0].drift(0, 0) == doctest::Approx(-0.3));
  CHECK(fitted.groups[0].drift(1, 1) == doctest::Approx(-1.1));
  CHECK(fitted.groups[0].loadings(0, 0) == doctest::Approx(1.4));
  CHECK(fitted.groups[0].loadings(0, 1) == doctest::Approx(0.7));
  CHECK(fitted.groups[0].predictor_effects(0, 0) == doctest::Approx(0.9));
  CHECK(fitted.groups[0].predictor_effects(1, 1) == doctest::Approx(-0.5));
}

TEST_CASE("recovery: one-replicate smoke design finishes and reports") {
  SimDesign design;
  design.n_groups = 2;
  design.members_per_group = 3;
  design.n_slices = 60;
  design.model = scalar_spec();
  design.model.predictor_channels = {"argument", "suggestion"};
  design.model.fill_defaults();
  CtGroupParams g = scalar_params(-0.1, 1.5, 0.25);
  g.predictor_effects = MatrixXd::Zero(1, 2);
  g.predictor_effects(0, 0) = 1.0;
  g.predictor_effects(0, 1) = -0.4;
  design.true_params.groups = {g, g};
  design.true_params.groups[1].loadings(0, 0) = 1.8;
  PredictorGenSpec gen;
  gen.kind = PredictorGenSpec::Kind::Bernoulli;
  gen.p = 0.4;
  design.predictor_process = {gen, gen};
  design.seed = 2025;

  RecoveryOptions options;
  options.fit.starts = 1;
  options.fit.threads = 2;
  options.fit_free = true;
  const auto report = recovery_experiment(design, 1, options);
  REQUIRE(report.n_replicates == 1);
  CHECK(report.n_converged == 1);
  CHECK(report.mae_drift < 0.5);
  CHECK(report.mae_loadings < 0.6);
  CHECK(report.sign_rate_loadings == doctest::Approx(1.0));
  REQUIRE(report.replicates[0].aic_free.has_value());
  CHECK(report.constrained_win_rate.has_value());
}

TEST_CASE("simulate-fit-simulate round trip preserves manifest moments") {
  SimDesign design;
  design.n_groups = 2;
  design.members_per_group = 3;
  design.n_slices = 150;
  design.model = scalar_spec();
  design.model.predictor_channels = {"argument", "suggestion"};
  design.model.fill_defaults();
  CtGroupParams g = scalar_params(-0.08, 1.4, 0.3);
  g.predictor_effects = MatrixXd::Zero(1, 2);
  g.predictor_effects(0, 0) = 0.8;
  design.true_params.groups = {g, g};
  design.true_params.groups[1].loadings(0, 0) = 1.6;
  PredictorGenSpec gen;
  gen.kind = PredictorGenSpec::Kind::Bernoulli;
  gen.p = 0.4;
  design.predictor_process = {gen, gen};
  design.seed = 88;

  const auto panels = simulate(design);
  const auto data = extract_dataset(panels, design.model);
  FitOptions options;
  options.starts = 1;
  options.compute_se = false;
  options.threads = 2;
  const auto result = fit(design.model, data, options);

  SimDesign refit_design = design;
  refit_design.true_params = result.params;
  refit_design.seed = 4242;
  const auto resim = simulate(refit_design);

  auto moments = [](const std::vector<BehaviorPanel>& ps) {
    double sum = 0.0, ss = 0.0;
    long n = 0;
    for (const auto& p : ps)
      for (const auto& m : p.members)
        for (const auto& rec : m.records) {
          sum += *rec.curiosity;
          ++n;
        }
    const double mean = sum / n;
    for (const auto& p : ps)
      for (const auto& m : p.members)
        for (const auto& rec : m.records) ss += (*rec.curiosity - mean) * (*rec.curiosity - mean);
    return std::pair<double, double>(mean, ss / n);
  };
  const auto [mean0, var0] = moments(panels);
  const auto [mean1, var1] = moments(resim);
  CHECK(std::abs(mean1 - mean0) < 0.1 * std::max(1.0, std::abs(mean0)));
  CHECK(std::abs(var1 - var0) < 0.1 * var0);
}
