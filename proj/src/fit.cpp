#include "ctpanel/fit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ParamLayout::to_natural(double x, ParamTransform t) {
  switch (t) {
    case ParamTransform::Identity: return x;
    case ParamTransform::NegExp: return -std::exp(x);
    case ParamTransform::Exp: return std::exp(x);
  }
  return x;
}

double ParamLayout::to_transformed(double value, ParamTransform t) {
  switch (t) {
    case ParamTransform::Identity:
      return value;
    case ParamTransform::NegExp:
      if (!(value < 0.0))
        throw NumericalError("cannot pack a non-negative drift diagonal");
      return std::log(-value);
    case ParamTransform::Exp:
      if (!(value > 0.0))
        throw NumericalError("cannot pack a non-positive variance");
      return std::log(value);
  }
  return value;
}

double ParamLayout::natural_derivative(double x, ParamTransform t) {
  switch (t) {
    case ParamTransform::Identity: return 1.0;
    case ParamTransform::NegExp: return std::exp(x);  // |d(-e^x)/dx|
    case ParamTransform::Exp: return std::exp(x);
  }
  return 1.0;
}

ParamLayout ParamLayout::build(const CtModelSpec& spec,
                               const std::vector<std::string>& group_labels) {
  ParamLayout layout;
  layout.spec_ = spec;
  layout.group_labels_ = group_labels;
  const int n = spec.n_latent, m = spec.n_manifest, p = spec.n_predictor();
  const int n_groups = static_cast<int>(group_labels.size());
  using Field = ParamEntry::Field;

  auto add = [&](std::string name, ParamTransform t, int group, Field field, int i,
                 int j) {
    layout.entries_.push_back({std::move(name), t, group, field, i, j});
  };

  // Shared dynamics block.
  for (int i = 0; i < n; ++i)
    add(fmt::format("drift.{}", spec.latent_names[i]), ParamTransform::NegExp, -1,
        Field::DriftDiag, i, i);
  if (spec.drift_form == DriftForm::Full)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j)
          add(fmt::format("drift.{}.{}", spec.latent_names[i], spec.latent_names[j]),
              ParamTransform::Identity, -1, Field::DriftOff, i, j);
  if (spec.free_cint)
    for (int i = 0; i < n; ++i)
      add(fmt::format("cint.{}", spec.latent_names[i]), ParamTransform::Identity, -1,
          Field::ContIntercept, i, 0);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < p; ++c)
      add(fmt::format("effect.{}.{}", spec.latent_names[i], spec.predictor_channels[c]),
          ParamTransform::Identity, -1, Field::PredictorEffect, i, c);
  if (!spec.free_cint)
    for (int j = 0; j < m; ++j)
      add(fmt::format("manifest_mean.{}", spec.manifest_names[j]),
          ParamTransform::Identity, -1, Field::ManifestIntercept, j, 0);
  for (int j = 0; j < m; ++j)
    add(fmt::format("manifest_var.{}", spec.manifest_names[j]), ParamTransform::Exp, -1,
        Field::ManifestLogVar, j, 0);
  if (spec.free_initial) {
    for (int i = 0; i < n; ++i)
      add(fmt::format("init_mean.{}", spec.latent_names[i]), ParamTransform::Identity,
          -1, Field::InitMean, i, 0);
    for (int i = 0; i < n; ++i)
      add(fmt::format("init_cov.{}.{}", spec.latent_names[i], spec.latent_names[i]),
          ParamTransform::Exp, -1, Field::InitCovDiag, i, i);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        add(fmt::format("init_cov.{}.{}", spec.latent_names[i], spec.latent_names[j]),
            ParamTransform::Identity, -1, Field::InitCovOff, i, j);
  }

  // Loadings: per group by default, shared otherwise.
  if (spec.loadings_per_group && n_groups > 1) {
    for (int g = 0; g < n_groups; ++g)
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i)
          add(fmt::format("loading.{}.{}.{}", group_labels[g], spec.manifest_names[j],
                          spec.latent_names[i]),
              ParamTransform::Identity, g, Field::Loading, j, i);
  } else {
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < n; ++i)
        add(fmt::format("loading.{}.{}", spec.manifest_names[j], spec.latent_names[i]),
            ParamTransform::Identity, -1, Field::Loading, j, i);
  }
  return layout;
}

CtParams ParamLayout::unpack(const VectorXd& x) const {
  if (x.size() != size())
    throw NumericalError("parameter vector length does not match the layout");
  const int n = spec_.n_latent, m = spec_.n_manifest, p = spec_.n_predictor();
  const int n_groups = static_cast<int>(group_labels_.size());

  CtGroupParams base;
  base.drift = MatrixXd::Zero(n, n);
  base.cont_intercept = VectorXd::Zero(n);
  base.diffusion_chol = MatrixXd::Identity(n, n);  // fixed: latent scale
  base.predictor_effects = MatrixXd::Zero(n, p);
  base.loadings = MatrixXd::Zero(m, n);
  base.manifest_intercept = VectorXd::Zero(m);
  base.manifest_error_var = VectorXd::Zero(m);
  MatrixXd init_chol = MatrixXd::Zero(n, n);
  VectorXd init_mean = VectorXd::Zero(n);

  CtParams params;
  params.groups.assign(static_cast<std::size_t>(n_groups), base);

  using Field = ParamEntry::Field;
  for (Eigen::Index k = 0; k < size(); ++k) {
    const auto& e = entries_[static_cast<std::size_t>(k)];
    const double value = to_natural(x(k), e.transform);
    auto apply = [&](CtGroupParams& g) {
      switch (e.field) {
        case Field::DriftDiag:
        case Field::DriftOff: g.drift(e.i, e.j) = value; break;
        case Field::ContIntercept: g.cont_intercept(e.i) = value; break;
        case Field::PredictorEffect: g.predictor_effects(e.i, e.j) = value; break;
        case Field::Loading: g.loadings(e.i, e.j) = value; break;
        case Field::ManifestIntercept: g.manifest_intercept(e.i) = value; break;
        case Field::ManifestLogVar: g.manifest_error_var(e.i) = value; break;
        case Field::InitMean: init_mean(e.i) = value; break;
        case Field::InitCovDiag:
        case Field::InitCovOff: init_chol(e.i, e.j) = value; break;
      }
    };
    if (e.group < 0) {
      for (auto& g : params.groups) apply(g);
    } else {
      apply(params.groups[static_cast<std::size_t>(e.group)]);
    }
  }

  if (spec_.free_initial) {
    const MatrixXd init_cov = init_chol * init_chol.transpose();
    for (auto& g : params.groups) {
      g.init_mean = init_mean;
      g.init_cov = init_cov;
    }
  }
  return params;
}

VectorXd ParamLayout::pack(const CtParams& params) const {
  const int n_groups = static_cast<int>(group_labels_.size());
  if (static_cast<int>(params.groups.size()) != n_groups)
    throw NumericalError("pack: group count mismatch");
  VectorXd x(size());
  using Field = ParamEntry::Field;
  for (Eigen::Index k = 0; k < size(); ++k) {
    const auto& e = entries_[static_cast<std::size_t>(k)];
    const auto& g = params.groups[static_cast<std::size_t>(std::max(e.group, 0))];
    double value = 0.0;
    switch (e.field) {
      case Field::DriftDiag:
      case Field::DriftOff: value = g.drift(e.i, e.j); break;
      case Field::ContIntercept: value = g.cont_intercept(e.i); break;
      case Field::PredictorEffect: value = g.predictor_effects(e.i, e.j); break;
      case Field::Loading: value = g.loadings(e.i, e.j); break;
      case Field::ManifestIntercept: value = g.manifest_intercept(e.i); break;
      case Field::ManifestLogVar: value = g.manifest_error_var(e.i); break;
      case Field::InitMean:
        value = g.init_mean ? (*g.init_mean)(e.i) : 0.0;
        break;
      case Field::InitCovDiag:
      case Field::InitCovOff: {
        // Pack the Cholesky factor of the stored covariance.
        MatrixXd cov = g.init_cov ? *g.init_cov
                                  : MatrixXd::Identity(spec_.n_latent, spec_.n_latent);
        Eigen::LLT<MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
          throw NumericalError("pack: init covariance is not positive definite");
        value = MatrixXd(llt.matrixL())(e.i, e.j);
        break;
      }
    }
    x(k) = to_transformed(value, e.transform);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Fitting.
// ---------------------------------------------------------------------------

namespace {

struct ManifestStats {
  double mean = 0.0;
  double var = 1.0;
  long n = 0;
  double drift_guess = -0.5;  // from the pooled lag-1 autocorrelation
};

ManifestStats manifest_stats(const CtDataset& data) {
  ManifestStats s;
  double sum = 0.0;
  for (const auto& subject : data.subjects)
    for (Eigen::Index t = 0; t < subject.manifest.cols(); ++t) {
      const double y = subject.manifest(0, t);
      if (!std::isnan(y)) {
        sum += y;
        ++s.n;
      }
    }
  if (s.n == 0) throw DataError("no observed manifest values in the dataset");
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0, lag_num = 0.0, dt_sum = 0.0;
  long lag_n = 0;
  for (const auto& subject : data.subjects)
    for (Eigen::Index t = 0; t < subject.manifest.cols(); ++t) {
      const double y = subject.manifest(0, t);
      if (std::isnan(y)) continue;
      ss += (y - s.mean) * (y - s.mean);
      if (t > 0 && !std::isnan(subject.manifest(0, t - 1))) {
        lag_num += (y - s.mean) * (subject.manifest(0, t - 1) - s.mean);
        dt_sum += subject.times(t) - subject.times(t - 1);
        ++lag_n;
      }
    }
  s.var = s.n > 1 ? ss / static_cast<double>(s.n - 1) : 1.0;
  if (s.var <= 0.0) s.var = 1.0;
  if (lag_n > 0 && ss > 0.0) {
    const double rho = std::clamp(lag_num / ss, 0.05, 0.95);
    const double dt_mean = dt_sum / static_cast<double>(lag_n);
    if (dt_mean > 0.0) s.drift_guess = std::log(rho) / dt_mean;
  }
  return s;
}

VectorXd default_start(const ParamLayout& layout, const ManifestStats& stats) {
  using Field = ParamEntry::Field;
  VectorXd x(layout.size());
  const int n_latent = layout.spec().n_latent;
  for (Eigen::Index k = 0; k < layout.size(); ++k) {
    const auto& e = layout.entries()[static_cast<std::size_t>(k)];
    double v = 0.0;
    switch (e.field) {
      // Drift starts bracket the timescale implied by the manifest lag-1
      // autocorrelation; the geometric stagger also keeps the start off the
      // permutation-symmetric manifold, which is a saddle for multi-latent
      // models.
      case Field::DriftDiag: {
        const double spread =
            std::pow(2.0, static_cast<double>(e.i) - 0.5 * (n_latent - 1));
        v = std::log(-stats.drift_guess * spread);
        break;
      }
      case Field::DriftOff: v = 0.0; break;
      case Field::ContIntercept: v = 0.0; break;
      case Field::PredictorEffect: v = 0.0; break;
      case Field::Loading: {
        // Split ~70% of the manifest variance evenly across latents given
        // the starting stationary scales 1 / (2 |a_i|).
        const double spread =
            std::pow(2.0, static_cast<double>(e.j) - 0.5 * (n_latent - 1));
        const double a_i = -(-stats.drift_guess * spread);
        v = std::sqrt(0.7 * stats.var * 2.0 * std::abs(a_i) /
                      static_cast<double>(n_latent));
        break;
      }
      case Field::ManifestIntercept: v = stats.mean; break;
      case Field::ManifestLogVar: v = std::log(0.3 * stats.var); break;
      case Field::InitMean: v = 0.0; break;
      case Field::InitCovDiag: v = 0.0; break;  // exp(0) = 1 on the diagonal
      case Field::InitCovOff: v = 0.0; break;
    }
    x(k) = v;
  }
  return x;
}

struct SingleFit {
  OptimResult opt;
  int start_index = 0;
};

SingleFit fit_single(const ParamLayout& layout, const CtDataset& data,
                     const FitOptions& options, int threads) {
  const auto stats = manifest_stats(data);
  const VectorXd x0 = default_start(layout, stats);

  Objective objective = [&layout, &data](const VectorXd& x) -> double {
    try {
      const CtParams params = layout.unpack(x);
      return -total_loglik(params, data, 1);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  OptimOptions opt_options;
  opt_options.max_iterations = options.max_iterations;
  opt_options.rel_f_tol = options.rel_tol;
  opt_options.threads = threads;

  SingleFit best;
  bool have_best = false;
  const int starts = std::max(options.starts, 1);
  for (int s = 0; s < starts; ++s) {
    VectorXd x_start = x0;
    if (s > 0) {
      Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(s)));
      for (Eigen::Index k = 0; k < x_start.size(); ++k)
        x_start(k) += 0.3 * rng.normal();
    }
    OptimResult run = minimize_bfgs(objective, x_start, opt_options);
    if (!have_best || run.f < best.opt.f) {
      best.opt = std::move(run);
      best.start_index = s;
      have_best = true;
    }
  }
  if (!have_best || !std::isfinite(best.opt.f))
    throw NumericalError("all optimization starts failed");
  return best;
}

std::vector<ParamSummary> summarize_parameters(const ParamLayout& layout,
                                               const VectorXd& x,
                                               const std::optional<VectorXd>& se) {
  std::vector<ParamSummary> out;
  out.reserve(static_cast<std::size_t>(layout.size()));
  for (Eigen::Index k = 0; k < layout.size(); ++k) {
    const auto& e = layout.entries()[static_cast<std::size_t>(k)];
    ParamSummary s;
    s.name = e.name;
    s.estimate = ParamLayout::to_natural(x(k), e.transform);
    if (se) {
      const double deriv = ParamLayout::natural_derivative(x(k), e.transform);
      s.std_error = deriv * (*se)(k);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<VectorXd> standard_errors(const ParamLayout& layout,
                                        const CtDataset& data, const VectorXd& x,
                                        int threads) {
  Objective objective = [&layout, &data](const VectorXd& v) -> double {
    try {
      return -total_loglik(layout.unpack(v), data, 1);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const MatrixXd hessian = numeric_hessian(objective, x, threads);
  if (!hessian.allFinite()) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hessian);
  const double max_eig = es.eigenvalues().maxCoeff();
  if (!(max_eig > 0.0)) return std::nullopt;
  if (es.eigenvalues().minCoeff() <= 1e-10 * max_eig) return std::nullopt;  // singular
  const MatrixXd cov = es.eigenvectors() *
                       es.eigenvalues().cwiseInverse().asDiagonal() *
                       es.eigenvectors().transpose();
  VectorXd se(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (cov(k, k) < 0.0) return std::nullopt;
    se(k) = std::sqrt(cov(k, k));
  }
  return se;
}

void check_series_lengths(const CtDataset& data) {
  if (data.subjects.empty()) throw DataError("fit: empty dataset");
  for (const auto& subject : data.subjects)
    if (subject.times.size() < 2)
      throw DataError(fmt::format("fit: member '{}' has fewer than 2 slices",
                                  subject.member));
}

CtDataset subset_group(const CtDataset& data, int group) {
  CtDataset out;
  out.group_ids = {data.group_ids[static_cast<std::size_t>(group)]};
  out.predictor_channels = data.predictor_channels;
  out.manifest_names = data.manifest_names;
  for (const auto& subject : data.subjects)
    if (subject.group == group) {
      SubjectData s = subject;
      s.group = 0;
      out.subjects.push_back(std::move(s));
    }
  return out;
}

}  // namespace

FitResult fit(const CtModelSpec& spec_in, const CtDataset& data,
              const FitOptions& options) {
  CtModelSpec spec = spec_in;
  spec.fill_defaults();
  spec.validate();
  if (spec.predictor_channels != data.predictor_channels)
    throw ConfigError("dataset predictor channels do not match the model spec");
  check_series_lengths(data);
  if (data.group_ids.empty()) throw DataError("fit: no groups in dataset");

  const GroupingMode mode = options.mode_override.value_or(spec.grouping);
  const int threads = options.threads > 0 ? options.threads : default_thread_count();

  FitResult result;
  result.spec = spec;
  result.mode = mode;
  result.group_ids = data.group_ids;
  result.seed = options.seed;
  result.starts = options.starts;

  if (mode == GroupingMode::Free && data.group_ids.size() > 1) {
    // The free model's likelihood factorizes over groups; fit each group on
    // its own and assemble the joint result.
    result.converged = true;
    result.loglik = 0.0;
    result.n_free_params = 0;
    CtModelSpec group_spec = spec;
    group_spec.grouping = GroupingMode::Free;
    for (std::size_t g = 0; g < data.group_ids.size(); ++g) {
      const CtDataset group_data = subset_group(data, static_cast<int>(g));
      FitOptions group_options = options;
      group_options.mode_override = GroupingMode::Free;
      group_options.seed = derive_seed(options.seed, 7700 + g);
      FitResult group_fit = fit(group_spec, group_data, group_options);
      result.loglik += group_fit.loglik;
      result.n_free_params += group_fit.n_free_params;
      result.converged = result.converged && group_fit.converged;
      result.iterations = std::max(result.iterations, group_fit.iterations);
      result.n_evaluations += group_fit.n_evaluations;
      result.cov_floor_events += group_fit.cov_floor_events;
      result.params.groups.push_back(group_fit.params.groups.at(0));
      for (auto& p : group_fit.parameters) {
        p.name = fmt::format("{}.{}", data.group_ids[g], p.name);
        result.parameters.push_back(std::move(p));
      }
    }
    result.aic = aic(result.loglik, result.n_free_params);
    result.standardized = standardize(result, data);
    return result;
  }

  const ParamLayout layout = ParamLayout::build(spec, data.group_ids);
  const SingleFit best = fit_single(layout, data, options, threads);

  result.params = layout.unpack(best.opt.x);
  result.loglik = -best.opt.f;
  result.n_free_params = static_cast<int>(layout.size());
  result.aic = aic(result.loglik, result.n_free_params);
  result.converged = best.opt.converged;
  result.iterations = best.opt.iterations;
  result.n_evaluations = best.opt.n_evaluations;
  total_loglik(result.params, data, 1, &result.cov_floor_events);

  std::optional<VectorXd> se;
  if (options.compute_se) se = standard_errors(layout, data, best.opt.x, threads);
  result.parameters = summarize_parameters(layout, best.opt.x, se);
  result.standardized = standardize(result, data);
  return result;
}

// ---------------------------------------------------------------------------
// Standardization and link ranking.
// ---------------------------------------------------------------------------

namespace {

std::optional<double> sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(values.size() - 1);
  if (var <= 0.0) return std::nullopt;
  return std::sqrt(var);
}

}  // namespace

StdTable standardize(const FitResult& result, const CtDataset& data) {
  const auto& spec = result.spec;
  const int n = spec.n_latent, p = spec.n_predictor();
  StdTable table;

  // Pooled empirical sds.
  std::vector<std::optional<double>> pred_sd(static_cast<std::size_t>(p));
  for (int c = 0; c < p; ++c) {
    std::vector<double> values;
    for (const auto& subject : data.subjects)
      for (Eigen::Index t = 0; t < subject.predictors.cols(); ++t)
        values.push_back(subject.predictors(c, t));
    pred_sd[static_cast<std::size_t>(c)] = sample_sd(values);
    if (!pred_sd[static_cast<std::size_t>(c)])
      table.warnings.push_back(fmt::format(
          "predictor channel '{}' has zero variance; standardized effects omitted",
          spec.predictor_channels[static_cast<std::size_t>(c)]));
  }
  std::vector<double> manifest_values;
  for (const auto& subject : data.subjects)
    for (Eigen::Index t = 0; t < subject.manifest.cols(); ++t)
      if (!std::isnan(subject.manifest(0, t)))
        manifest_values.push_back(subject.manifest(0, t));
  const auto manifest_sd = sample_sd(manifest_values);
  if (!manifest_sd)
    table.warnings.push_back(
        "manifest has zero variance; standardized loadings omitted");

  // Model-implied stationary latent sds per group.
  const auto n_groups = result.params.groups.size();
  std::vector<VectorXd> latent_sd(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const MatrixXd q_inf = stationary_covariance(
        result.params.groups[g].drift, result.params.groups[g].diffusion_cov());
    latent_sd[g] = q_inf.diagonal().cwiseMax(0.0).cwiseSqrt();
  }

  // Behavior -> latent effects.
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < p; ++c) {
      StdEffect effect;
      effect.source = spec.predictor_channels[static_cast<std::size_t>(c)];
      effect.target = spec.latent_names[static_cast<std::size_t>(i)];
      if (!pred_sd[static_cast<std::size_t>(c)]) {
        effect.flagged = true;
        table.effects.push_back(std::move(effect));
        continue;
      }
      for (std::size_t g = 0; g < n_groups; ++g) {
        const double denom = latent_sd[g](i);
        if (denom <= 0.0) continue;
        effect.per_group.push_back(result.params.groups[g].predictor_effects(i, c) *
                                   (*pred_sd[static_cast<std::size_t>(c)]) / denom);
      }
      if (!effect.per_group.empty()) {
        double mean = 0.0;
        for (double v : effect.per_group) mean += v;
        effect.mean = mean / static_cast<double>(effect.per_group.size());
        if (effect.per_group.size() > 1) {
          double ss = 0.0;
          for (double v : effect.per_group) ss += (v - *effect.mean) * (v - *effect.mean);
          effect.sd = std::sqrt(ss / static_cast<double>(effect.per_group.size() - 1));
        }
      } else {
        effect.flagged = true;
      }
      table.effects.push_back(std::move(effect));
    }
  }

  // Latent -> manifest loadings (first manifest row; panels carry one).
  for (int i = 0; i < n; ++i) {
    StdEffect effect;
    effect.source = spec.latent_names[static_cast<std::size_t>(i)];
    effect.target = spec.manifest_names.empty() ? "manifest" : spec.manifest_names[0];
    effect.latent_to_manifest = true;
    if (!manifest_sd) {
      effect.flagged = true;
      table.effects.push_back(std::move(effect));
      continue;
    }
    for (std::size_t g = 0; g < n_groups; ++g) {
      const double num = latent_sd[g](i);
      if (num <= 0.0) continue;
      effect.per_group.push_back(result.params.groups[g].loadings(0, i) * num /
                                 (*manifest_sd));
    }
    if (!effect.per_group.empty()) {
      double mean = 0.0;
      for (double v : effect.per_group) mean += v;
      effect.mean = mean / static_cast<double>(effect.per_group.size());
      if (effect.per_group.size() > 1) {
        double ss = 0.0;
        for (double v : effect.per_group) ss += (v - *effect.mean) * (v - *effect.mean);
        effect.sd = std::sqrt(ss / static_cast<double>(effect.per_group.size() - 1));
      }
    } else {
      effect.flagged = true;
    }
    table.effects.push_back(std::move(effect));
  }
  return table;
}

LinkReport rank_links(const StdTable& table, int top_k_per_latent) {
  if (table.effects.empty()) throw DataError("rank_links: empty table");
  LinkReport report;

  // Group candidate edges per target, preserving target first-seen order.
  std::vector<std::string> targets;
  for (const auto& e : table.effects) {
    if (!e.mean) continue;
    if (std::find(targets.begin(), targets.end(), e.target) == targets.end())
      targets.push_back(e.target);
  }
  for (const auto& target : targets) {
    std::vector<const StdEffect*> edges;
    bool latent_target = false;
    for (const auto& e : table.effects) {
      if (!e.mean || e.target != target) continue;
      edges.push_back(&e);
      latent_target = !e.latent_to_manifest;
    }
    std::sort(edges.begin(), edges.end(), [](const StdEffect* a, const StdEffect* b) {
      const double ma = std::abs(*a->mean), mb = std::abs(*b->mean);
      if (ma != mb) return ma > mb;
      return a->source < b->source;
    });
    const std::size_t keep =
        latent_target ? static_cast<std::size_t>(std::max(top_k_per_latent, 1))
                      : edges.size();
    for (std::size_t r = 0; r < edges.size() && r < keep; ++r)
      report.edges.push_back({edges[r]->source, target, *edges[r]->mean, edges[r]->sd,
                              static_cast<int>(r + 1), edges[r]->latent_to_manifest});
  }
  return report;
}

}  // namespace ctpanel
