#include <cmath>

#include "ctpanel/ctsem.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctpanel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CtModelSpec spec_with_dims(int n_latent, int n_manifest, int n_predictor) {
  CtModelSpec spec;
  spec.n_latent = n_latent;
  spec.n_manifest = n_manifest;
  for (int i = 0; i < n_latent; ++i)
    spec.latent_names.push_back("l" + std::to_string(i + 1));
  for (int j = 0; j < n_manifest; ++j)
    spec.manifest_names.push_back("y" + std::to_string(j + 1));
  const char* channels[] = {"argument", "suggestion", "agreement", "uncertainty",
                            "justification", "sharing_findings"};
  for (int c = 0; c < n_predictor; ++c) spec.predictor_channels.push_back(channels[c]);
  spec.fill_defaults();
  return spec;
}

CtGroupParams random_params(Rng& rng, const CtModelSpec& spec, bool with_impulses) {
  const int n = spec.n_latent, m = spec.n_manifest, p = spec.n_predictor();
  CtGroupParams g;
  g.drift = oracles::random_stable_drift(rng, n, 0.3);
  g.cont_intercept = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) g.cont_intercept(i) = 0.5 * rng.normal();
  MatrixXd chol = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    chol(i, i) = 0.5 + rng.uniform();
    for (int j = 0; j < i; ++j) chol(i, j) = 0.3 * rng.normal();
  }
  g.diffusion_chol = chol;
  g.predictor_effects = MatrixXd::Zero(n, p);
  if (with_impulses)
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < p; ++c) g.predictor_effects(i, c) = 0.5 * rng.normal();
  g.loadings = MatrixXd::Zero(m, n);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) g.loadings(j, i) = rng.normal();
  g.manifest_intercept = VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) g.manifest_intercept(j) = rng.normal();
  g.manifest_error_var = VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) g.manifest_error_var(j) = 0.3 + rng.uniform();
  return g;
}

SubjectData random_subject(Rng& rng, const CtModelSpec& spec, int t_len,
                           double missing_rate) {
  SubjectData s;
  s.member = "m";
  s.group_id = "g1";
  s.group = 0;
  s.times.resize(t_len);
  double t = 0.0;
  for (int k = 0; k < t_len; ++k) {
    t += 0.5 + 2.0 * rng.uniform();
    s.times(k) = t;
  }
  s.predictors = MatrixXd::Zero(spec.n_predictor(), t_len);
  for (int c = 0; c < spec.n_predictor(); ++c)
    for (int k = 0; k < t_len; ++k)
      s.predictors(c, k) = rng.bernoulli(0.4) ? 1.0 : 0.0;
  s.manifest = MatrixXd::Zero(spec.n_manifest, t_len);
  for (int j = 0; j < spec.n_manifest; ++j)
    for (int k = 0; k < t_len; ++k)
      s.manifest(j, k) = rng.uniform() < missing_rate
                             ? std::numeric_limits<double>::quiet_NaN()
                             : rng.normal();
  return s;
}

}  // namespace

TEST_CASE("kalman: zero-length series has zero loglik") {
  const auto spec = spec_with_dims(2, 1, 2);
  Rng rng(1);
  const auto params = random_params(rng, spec, true);
  SubjectData s;
  s.predictors = MatrixXd::Zero(2, 0);
  s.manifest = MatrixXd::Zero(1, 0);
  const auto r = kalman_loglik(params, s);
  CHECK(r.loglik == 0.0);
  CHECK(r.n_observations == 0);
}

TEST_CASE("kalman: single-observation univariate density") {
  // mu0 = 0, Sigma0 = 1, Lambda = 1, tau = 0, Theta = 1, y = 0
  // -> N(0, 2) density at 0: -0.5 ln(4 pi)
  CtModelSpec spec = spec_with_dims(1, 1, 1);
  CtGroupParams g;
  g.drift = MatrixXd::Constant(1, 1, -0.5);
  g.cont_intercept = VectorXd::Zero(1);
  g.diffusion_chol = MatrixXd::Identity(1, 1);
  g.predictor_effects = MatrixXd::Zero(1, 1);
  g.loadings = MatrixXd::Identity(1, 1);
  g.manifest_intercept = VectorXd::Zero(1);
  g.manifest_error_var = VectorXd::Ones(1);
  g.init_mean = VectorXd::Zero(1);
  g.init_cov = MatrixXd::Identity(1, 1);

  SubjectData s;
  s.times = VectorXd::Zero(1);
  s.predictors = MatrixXd::Zero(1, 1);
  s.manifest = MatrixXd::Zero(1, 1);

  const auto r = kalman_loglik(g, s);
  CHECK(r.loglik == doctest::Approx(-0.5 * std::log(4.0 * 3.14159265358979323846))
                        .epsilon(1e-10));
  CHECK(r.loglik == doctest::Approx(-1.2655121234846454).epsilon(1e-10));
}

TEST_CASE("kalman: matches the joint multivariate-normal oracle") {
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 4.0);
    const int m = 1 + (rng.bernoulli(0.3) ? 1 : 0);
    const int p = 1 + static_cast<int>(rng.uniform() * 3.0);
    const auto spec = spec_with_dims(std::min(n, 4), std::min(m, 2), std::min(p, 4));
    const auto params = random_params(rng, spec, true);
    const int t_len = 1 + static_cast<int>(rng.uniform() * 5.0);
    const auto subject = random_subject(rng, spec, std::min(t_len, 5), 0.25);

    double expected;
    try {
      expected = oracles::joint_mvn_loglik(params, subject);
    } catch (...) {
      continue;
    }
    const auto r = kalman_loglik(params, subject);
    CHECK(r.loglik == doctest::Approx(expected).epsilon(1e-6));
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("kalman: missing manifests skip updates") {
  const auto spec = spec_with_dims(2, 1, 2);
  Rng rng(21);
  const auto params = random_params(rng, spec, true);
  auto subject = random_subject(rng, spec, 5, 0.0);
  subject.manifest.setConstant(std::numeric_limits<double>::quiet_NaN());
  const auto r = kalman_loglik(params, subject);
  CHECK(r.loglik == 0.0);
  CHECK(r.n_observations == 0);
}

TEST_CASE("total loglik: order-fixed reduction matches for any worker count") {
  const auto spec = spec_with_dims(2, 1, 3);
  Rng rng(55);
  CtParams params;
  params.groups.push_back(random_params(rng, spec, true));
  params.groups.push_back(random_params(rng, spec, true));

  CtDataset data;
  data.group_ids = {"g1", "g2"};
  data.predictor_channels = spec.predictor_channels;
  data.manifest_names = spec.manifest_names;
  for (int i = 0; i < 6; ++i) {
    auto s = random_subject(rng, spec, 20, 0.1);
    s.group = i % 2;
    s.group_id = data.group_ids[static_cast<std::size_t>(s.group)];
    s.member = "m" + std::to_string(i);
    data.subjects.push_back(std::move(s));
  }
  const double serial = total_loglik(params, data, 1);
  const double two = total_loglik(params, data, 2);
  const double four = total_loglik(params, data, 4);
  CHECK(serial == two);
  CHECK(serial == four);

  // Group relabeling leaves the total invariant.
  CtParams swapped;
  swapped.groups = {params.groups[1], params.groups[0]};
  CtDataset relabeled = data;
  relabeled.group_ids = {"g2", "g1"};
  for (auto& s : relabeled.subjects) s.group = 1 - s.group;
  CHECK(total_loglik(swapped, relabeled, 1) == doctest::Approx(serial).epsilon(1e-12));
}

TEST_CASE("aic: worked examples and magnitudes") {
  CHECK(aic(-10.0, 3) == doctest::Approx(26.0));
  CHECK(aic(0.0, 0) == doctest::Approx(0.0));
  // Values at the published scale stay exact.
  CHECK(aic(-426.74, 40) == doctest::Approx(933.48));
  CHECK(std::isfinite(aic(-1e6, 5000)));
  CHECK_THROWS_AS(aic(0.0, -1), ConfigError);
}

TEST_CASE("extract_dataset: channels, missing handling, ordering") {
  BehaviorPanel panel;
  panel.group_id = "g1";
  MemberSeries b;
  b.member = "b";
  MemberSeries a;
  a.member = "a";
  for (int t = 0; t < 3; ++t) {
    PanelRecord rec;
    rec.slice_index = t;
    rec.time = 5.0 + 10.0 * t;
    for (int c = 0; c < kNumChannels; ++c) rec.channels[c] = 0.0;
    rec.channels[*channel_index("argument")] = static_cast<double>(t);
    if (t == 1)
      rec.curiosity = std::nullopt;
    else
      rec.curiosity = 1.0;
    a.records.push_back(rec);
    rec.channels[*channel_index("turn_indegree")] = std::nullopt;  // missing predictor
    b.records.push_back(rec);
  }
  panel.members = {b, a};

  CtModelSpec spec = spec_with_dims(1, 1, 0);
  spec.predictor_channels = {"argument", "turn_indegree"};
  const std::vector<BehaviorPanel> panels = {panel};
  const auto data = extract_dataset(panels, spec);
  REQUIRE(data.subjects.size() == 2);
  CHECK(data.subjects[0].member == "a");  // sorted within group
  CHECK(data.subjects[1].member == "b");
  CHECK(data.missing_predictor_cells == 3);
  CHECK(std::isnan(data.subjects[0].manifest(0, 1)));
  CHECK(data.subjects[0].predictors(0, 2) == 2.0);
  CHECK(data.subjects[1].predictors(1, 2) == 0.0);  // zero-imputed
}
