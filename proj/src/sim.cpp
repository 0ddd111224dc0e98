#include "ctpanel/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctpanel/channels.hpp"

namespace ctpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void SimDesign::validate() const {
  if (n_groups < 1 || members_per_group < 1 || n_slices < 1)
    throw ConfigError("design counts must be >= 1");
  if (slice_len <= 0.0) throw ConfigError("design.slice_len must be positive");
  model.validate();
  if (static_cast<int>(true_params.groups.size()) != n_groups)
    throw ConfigError(fmt::format("true_params has {} groups, design asks for {}",
                                  true_params.groups.size(), n_groups));
  if (static_cast<int>(predictor_process.size()) !=
      static_cast<int>(model.predictor_channels.size()))
    throw ConfigError("predictor_process must cover every predictor channel");
  for (const auto& g : true_params.groups) g.validate(model);
  for (const auto& name : model.predictor_channels)
    if (!channel_index(name))
      throw ConfigError(fmt::format("unknown predictor channel '{}'", name));
}

namespace {

// Symmetric PSD square root; handles singular covariances (e.g. zero
// diffusion) where a Cholesky factor does not exist.
MatrixXd psd_sqrt(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
  VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

double draw_predictor(const PredictorGenSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case PredictorGenSpec::Kind::Bernoulli:
      return rng.bernoulli(spec.p) ? 1.0 : 0.0;
    case PredictorGenSpec::Kind::Poisson:
      return static_cast<double>(rng.poisson(spec.rate));
    case PredictorGenSpec::Kind::Gaussian:
      return spec.mean + spec.sd * rng.normal();
    case PredictorGenSpec::Kind::Resample: {
      if (spec.pool.empty())
        throw ConfigError("resample predictor generator has an empty pool");
      const auto idx = static_cast<std::size_t>(rng.uniform() *
                                                static_cast<double>(spec.pool.size()));
      return spec.pool[std::min(idx, spec.pool.size() - 1)];
    }
  }
  return 0.0;
}

}  // namespace

std::vector<BehaviorPanel> simulate(const SimDesign& design) {
  design.validate();
  const int n = design.model.n_latent;
  const int m = design.model.n_manifest;
  const int p = design.model.n_predictor();
  const int T = design.n_slices;

  std::vector<int> channel_ids;
  for (const auto& name : design.model.predictor_channels)
    channel_ids.push_back(*channel_index(name));

  std::vector<BehaviorPanel> panels;
  for (int g = 0; g < design.n_groups; ++g) {
    const auto& params = design.true_params.groups[static_cast<std::size_t>(g)];
    GroupDynamics dynamics(params);
    const Discretized& step = dynamics.discretized(design.slice_len);
    const MatrixXd sqrt_q = psd_sqrt(step.Q_d);
    const MatrixXd sqrt_init = psd_sqrt(dynamics.init_cov());
    const VectorXd error_sd = params.manifest_error_var.cwiseSqrt();

    BehaviorPanel panel;
    panel.group_id = fmt::format("g{}", g + 1);
    for (int j = 0; j < design.members_per_group; ++j) {
      Rng rng(derive_seed(derive_seed(design.seed, static_cast<std::uint64_t>(g)),
                          static_cast<std::uint64_t>(j)));
      MemberSeries series;
      series.member = fmt::format("m{}", j + 1);

      // Predictor draws first (time-major), then the latent path.
      MatrixXd chi(p, T);
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < p; ++c)
          chi(c, t) = draw_predictor(
              design.predictor_process[static_cast<std::size_t>(c)], rng);

      VectorXd x(n);
      for (int t = 0; t < T; ++t) {
        VectorXd z(n);
        for (int i = 0; i < n; ++i) z(i) = rng.normal();
        if (t == 0) {
          x = dynamics.init_mean() + sqrt_init * z;
        } else {
          x = step.A_d * x + step.b_d + sqrt_q * z;
        }
        x += params.predictor_effects * chi.col(t);

        VectorXd y = params.loadings * x + params.manifest_intercept;
        for (int j2 = 0; j2 < m; ++j2) y(j2) += error_sd(j2) * rng.normal();

        PanelRecord rec;
        rec.slice_index = t;
        rec.time = (static_cast<double>(t) + 0.5) * design.slice_len;
        for (int c = 0; c < kNumChannels; ++c)
          if (channel_defaults_to_zero(c)) rec.channels[c] = 0.0;
        for (int c = 0; c < p; ++c)
          rec.channels[static_cast<std::size_t>(channel_ids[static_cast<std::size_t>(c)])] =
              chi(c, t);
        double manifest = y(0);
        if (design.ordinal_manifest) {
          manifest = manifest < design.ordinal_thresholds[0]   ? 0.0
                     : manifest < design.ordinal_thresholds[1] ? 1.0
                                                               : 2.0;
        }
        rec.curiosity = manifest;
        series.records.push_back(std::move(rec));
      }
      panel.members.push_back(std::move(series));
    }
    panels.push_back(std::move(panel));
  }
  return panels;
}

// ---------------------------------------------------------------------------
// Recovery experiments.
// ---------------------------------------------------------------------------

void canonicalize_latent_signs(CtParams& params) {
  if (params.groups.empty()) return;
  const auto n = params.groups[0].loadings.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    double loading_sum = 0.0;
    for (const auto& g : params.groups) loading_sum += g.loadings.col(i).sum();
    if (loading_sum >= 0.0) continue;
    for (auto& g : params.groups) {
      g.loadings.col(i) *= -1.0;
      g.predictor_effects.row(i) *= -1.0;
      g.cont_intercept(i) *= -1.0;
      if (g.init_mean) (*g.init_mean)(i) *= -1.0;
      // Diagonal drift and identity diffusion are sign-invariant; the
      // convention is only defined for that model family.
    }
  }
}

std::vector<int> align_to_truth(CtParams& fitted, const CtParams& truth) {
  if (fitted.groups.size() != truth.groups.size())
    throw ConfigError("align_to_truth: group count mismatch");
  const auto n = fitted.groups[0].drift.rows();

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (const auto& g : fitted.groups) {
        // Only diagonals drive the matching.
        cost += std::abs(g.drift(perm[static_cast<std::size_t>(i)],
                                 perm[static_cast<std::size_t>(i)]) -
                         truth.groups[0].drift(i, i));
      }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  // Apply the permutation: fitted latent best[i] becomes latent i.
  for (auto& g : fitted.groups) {
    CtGroupParams reordered = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(best[static_cast<std::size_t>(i)]);
      reordered.drift(i, i) = g.drift(src, src);
      reordered.predictor_effects.row(i) = g.predictor_effects.row(src);
      reordered.loadings.col(i) = g.loadings.col(src);
      reordered.cont_intercept(i) = g.cont_intercept(src);
      if (g.init_mean) (*reordered.init_mean)(i) = (*g.init_mean)(src);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j)
          reordered.drift(i, j) =
              g.drift(static_cast<Eigen::Index>(best[static_cast<std::size_t>(i)]),
                      static_cast<Eigen::Index>(best[static_cast<std::size_t>(j)]));
    g = std::move(reordered);
  }
  canonicalize_latent_signs(fitted);
  return best;
}

namespace {

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

ReplicateResult evaluate_replicate(const SimDesign& base, int replicate,
                                   const RecoveryOptions& options) {
  SimDesign design = base;
  design.seed = derive_seed(base.seed, 1000 + static_cast<std::uint64_t>(replicate));
  const auto panels = simulate(design);
  const CtDataset data = extract_dataset(panels, design.model);

  FitOptions fit_options = options.fit;
  fit_options.compute_se = false;
  fit_options.seed = derive_seed(fit_options.seed, static_cast<std::uint64_t>(replicate));
  fit_options.mode_override = GroupingMode::Constrained;
  FitResult constrained = fit(design.model, data, fit_options);

  ReplicateResult rep;
  rep.replicate = replicate;
  rep.converged = constrained.converged;
  rep.loglik = constrained.loglik;
  rep.aic_constrained = constrained.aic;

  CtParams truth = design.true_params;
  canonicalize_latent_signs(truth);
  CtParams aligned = constrained.params;
  align_to_truth(aligned, truth);

  const auto n = truth.groups[0].drift.rows();
  double drift_err = 0.0, drift_signs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    drift_err += std::abs(aligned.groups[0].drift(i, i) - truth.groups[0].drift(i, i));
    drift_signs += sign_of(aligned.groups[0].drift(i, i)) ==
                           sign_of(truth.groups[0].drift(i, i))
                       ? 1.0
                       : 0.0;
  }
  rep.mae_drift = drift_err / static_cast<double>(n);
  rep.sign_rate_drift = drift_signs / static_cast<double>(n);

  double loading_err = 0.0, loading_signs = 0.0, loading_count = 0.0;
  for (std::size_t g = 0; g < truth.groups.size(); ++g)
    for (Eigen::Index j = 0; j < truth.groups[g].loadings.rows(); ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = truth.groups[g].loadings(j, i);
        const double f = aligned.groups[g].loadings(j, i);
        loading_err += std::abs(f - t);
        loading_signs += sign_of(f) == sign_of(t) ? 1.0 : 0.0;
        loading_count += 1.0;
      }
  rep.mae_loadings = loading_err / loading_count;
  rep.sign_rate_loadings = loading_signs / loading_count;

  double effect_err = 0.0, effect_count = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < truth.groups[0].predictor_effects.cols(); ++c) {
      effect_err += std::abs(aligned.groups[0].predictor_effects(i, c) -
                             truth.groups[0].predictor_effects(i, c));
      effect_count += 1.0;
    }
  rep.mae_effects = effect_err / effect_count;

  if (options.fit_free) {
    FitOptions free_options = options.fit;
    free_options.compute_se = false;
    free_options.seed =
        derive_seed(free_options.seed, 500000 + static_cast<std::uint64_t>(replicate));
    free_options.mode_override = GroupingMode::Free;
    FitResult free_fit = fit(design.model, data, free_options);
    rep.aic_free = free_fit.aic;
    rep.free_converged = free_fit.converged;
    rep.constrained_won = constrained.aic < free_fit.aic;
  }
  return rep;
}

}  // namespace

RecoveryReport recovery_experiment(const SimDesign& design, int n_replicates,
                                   const RecoveryOptions& options) {
  if (n_replicates < 1) throw ConfigError("n_replicates must be >= 1");
  if (design.model.drift_form != DriftForm::Diagonal)
    throw ConfigError("recovery alignment requires a diagonal drift model");
  {
    // The sign convention must hold for the generating parameters, otherwise
    // sign-recovery rates are not interpretable.
    CtParams truth = design.true_params;
    canonicalize_latent_signs(truth);
    for (std::size_t g = 0; g < truth.groups.size(); ++g)
      if (!truth.groups[g].loadings.isApprox(design.true_params.groups[g].loadings))
        throw ConfigError(
            "true loadings violate the positive-loading-sum sign convention");
  }

  RecoveryReport report;
  report.n_replicates = n_replicates;
  report.replicates.resize(static_cast<std::size_t>(n_replicates));

  parallel_for(static_cast<std::size_t>(n_replicates), options.replicate_threads,
               [&](std::size_t r) {
                 report.replicates[r] =
                     evaluate_replicate(design, static_cast<int>(r), options);
               });

  double mae_drift = 0.0, mae_loadings = 0.0, mae_effects = 0.0;
  double signs_drift = 0.0, signs_loadings = 0.0;
  int wins = 0, wins_total = 0;
  for (const auto& rep : report.replicates) {
    if (rep.converged) ++report.n_converged;
    mae_drift += rep.mae_drift;
    mae_loadings += rep.mae_loadings;
    mae_effects += rep.mae_effects;
    signs_drift += rep.sign_rate_drift;
    signs_loadings += rep.sign_rate_loadings;
    if (rep.constrained_won.has_value()) {
      ++wins_total;
      if (*rep.constrained_won) ++wins;
    }
  }
  const double nr = static_cast<double>(n_replicates);
  report.mae_drift = mae_drift / nr;
  report.mae_loadings = mae_loadings / nr;
  report.mae_effects = mae_effects / nr;
  report.sign_rate_drift = signs_drift / nr;
  report.sign_rate_loadings = signs_loadings / nr;
  if (wins_total > 0)
    report.constrained_win_rate = static_cast<double>(wins) / wins_total;
  return report;
}

}  // namespace ctpanel
