#include "ctpanel/config.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace ctpanel {

using minitoml::Table;

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows,
                          const std::string& key) {
  if (rows.empty()) throw ConfigError(fmt::format("'{}' must not be empty", key));
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ConfigError(fmt::format("'{}' rows have inconsistent lengths", key));
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

CtModelSpec model_spec_from(const Table& config) {
  CtModelSpec spec;
  if (config.has("model.latents")) spec.latent_names = config.strings("model.latents");
  if (config.has("model.n_latent"))
    spec.n_latent = static_cast<int>(config.integer("model.n_latent"));
  if (config.has("model.predictors"))
    spec.predictor_channels = config.strings("model.predictors");
  if (config.has("model.manifests"))
    spec.manifest_names = config.strings("model.manifests");
  spec.drift_form = drift_form_from_string(config.str_or("model.drift", "diagonal"));
  spec.grouping = grouping_from_string(config.str_or("model.grouping", "constrained"));
  spec.loadings_per_group = config.boolean_or("model.loadings_per_group", true);
  spec.free_cint = config.boolean_or("model.free_cint", false);
  spec.free_initial = config.boolean_or("model.free_initial", false);
  spec.fill_defaults();
  spec.validate();
  return spec;
}

FitOptions fit_options_from(const Table& config) {
  FitOptions fit;
  fit.starts = static_cast<int>(config.integer_or("fit.starts", fit.starts));
  fit.seed = static_cast<std::uint64_t>(
      config.integer_or("fit.seed", static_cast<long>(fit.seed)));
  fit.rel_tol = config.number_or("fit.rel_tol", fit.rel_tol);
  fit.max_iterations =
      static_cast<int>(config.integer_or("fit.max_iter", fit.max_iterations));
  fit.threads = static_cast<int>(config.integer_or("fit.threads", 0));
  fit.compute_se = config.boolean_or("fit.compute_se", true);
  if (fit.starts < 1) throw ConfigError("fit.starts must be >= 1");
  if (fit.max_iterations < 1) throw ConfigError("fit.max_iter must be >= 1");
  if (fit.rel_tol <= 0.0) throw ConfigError("fit.rel_tol must be positive");
  return fit;
}

PredictorGenSpec generator_from(const Table& config, const std::string& prefix) {
  PredictorGenSpec gen;
  const std::string kind = config.str_or(prefix + ".kind", "bernoulli");
  if (kind == "bernoulli") {
    gen.kind = PredictorGenSpec::Kind::Bernoulli;
    gen.p = config.number_or(prefix + ".p", gen.p);
    if (gen.p < 0.0 || gen.p > 1.0)
      throw ConfigError(fmt::format("'{}.p' must be in [0,1]", prefix));
  } else if (kind == "poisson") {
    gen.kind = PredictorGenSpec::Kind::Poisson;
    gen.rate = config.number_or(prefix + ".rate", gen.rate);
    if (gen.rate < 0.0) throw ConfigError(fmt::format("'{}.rate' must be >= 0", prefix));
  } else if (kind == "gaussian") {
    gen.kind = PredictorGenSpec::Kind::Gaussian;
    gen.mean = config.number_or(prefix + ".mean", 0.0);
    gen.sd = config.number_or(prefix + ".sd", 1.0);
    if (gen.sd < 0.0) throw ConfigError(fmt::format("'{}.sd' must be >= 0", prefix));
  } else if (kind == "resample") {
    gen.kind = PredictorGenSpec::Kind::Resample;
    gen.pool = config.numbers(prefix + ".pool");
    if (gen.pool.empty())
      throw ConfigError(fmt::format("'{}.pool' must not be empty", prefix));
  } else {
    throw ConfigError(fmt::format(
        "'{}.kind': unknown generator '{}' (bernoulli|poisson|gaussian|resample)",
        prefix, kind));
  }
  return gen;
}

}  // namespace

ModelConfig load_model_config(const std::string& path) {
  const Table config = Table::parse_file(path);
  ModelConfig out;
  out.spec = model_spec_from(config);
  out.fit = fit_options_from(config);
  out.report_top_k = static_cast<int>(config.integer_or("report.top_k", 1));
  if (out.report_top_k < 1) throw ConfigError("report.top_k must be >= 1");
  return out;
}

SimDesign load_sim_design(const std::string& path) {
  const Table config = Table::parse_file(path);
  SimDesign design;
  design.n_groups = static_cast<int>(config.integer("design.n_groups"));
  design.members_per_group =
      static_cast<int>(config.integer("design.members_per_group"));
  design.n_slices = static_cast<int>(config.integer("design.n_slices"));
  design.slice_len = config.number_or("design.slice_len", 10.0);
  design.seed = static_cast<std::uint64_t>(config.integer_or("design.seed", 1));
  design.ordinal_manifest = config.boolean_or("design.ordinal_manifest", false);
  if (config.has("design.ordinal_thresholds")) {
    const auto t = config.numbers("design.ordinal_thresholds");
    if (t.size() != 2)
      throw ConfigError("design.ordinal_thresholds must have 2 entries");
    design.ordinal_thresholds = {t[0], t[1]};
  }

  design.model = model_spec_from(config);
  const int n = design.model.n_latent;
  const int p = design.model.n_predictor();
  const int m = design.model.n_manifest;

  // Shared base parameters.
  CtGroupParams base;
  const auto drift_diag = to_vector(config.numbers("true_params.drift_diag"));
  if (drift_diag.size() != n)
    throw ConfigError("true_params.drift_diag size must match the latent count");
  base.drift = Eigen::MatrixXd(drift_diag.asDiagonal());
  if (config.has("true_params.drift"))
    base.drift = to_matrix(config.matrix("true_params.drift"), "true_params.drift");
  base.cont_intercept = Eigen::VectorXd::Zero(n);
  if (config.has("true_params.cont_intercept"))
    base.cont_intercept = to_vector(config.numbers("true_params.cont_intercept"));
  base.diffusion_chol = Eigen::MatrixXd::Identity(n, n);
  base.predictor_effects = to_matrix(config.matrix("true_params.predictor_effects"),
                                     "true_params.predictor_effects");
  if (base.predictor_effects.rows() != n || base.predictor_effects.cols() != p)
    throw ConfigError("true_params.predictor_effects must be n_latent x n_predictors");
  base.manifest_intercept =
      Eigen::VectorXd::Constant(m, config.number_or("true_params.manifest_intercept", 0.0));
  base.manifest_error_var = Eigen::VectorXd::Constant(
      m, config.number_or("true_params.manifest_error_var", 0.25));

  // Loadings: one row per group, or a single row broadcast to every group.
  const auto loadings = config.matrix("true_params.loadings");
  for (int g = 0; g < design.n_groups; ++g) {
    CtGroupParams gp = base;
    const std::size_t row =
        loadings.size() == 1 ? 0 : static_cast<std::size_t>(g);
    if (row >= loadings.size())
      throw ConfigError("true_params.loadings needs one row per group");
    if (static_cast<int>(loadings[row].size()) != n)
      throw ConfigError("true_params.loadings rows must match the latent count");
    gp.loadings = Eigen::MatrixXd(m, n);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < n; ++i) gp.loadings(j, i) = loadings[row][static_cast<std::size_t>(i)];

    // Optional per-group overrides, e.g. [true_params.per_group.g2].
    const std::string prefix = fmt::format("true_params.per_group.g{}", g + 1);
    if (config.has(prefix + ".drift_diag")) {
      const auto d = to_vector(config.numbers(prefix + ".drift_diag"));
      if (d.size() != n)
        throw ConfigError(fmt::format("'{}.drift_diag' has the wrong size", prefix));
      gp.drift = Eigen::MatrixXd(d.asDiagonal());
    }
    if (config.has(prefix + ".predictor_effects")) {
      gp.predictor_effects = to_matrix(config.matrix(prefix + ".predictor_effects"),
                                       prefix + ".predictor_effects");
      if (gp.predictor_effects.rows() != n || gp.predictor_effects.cols() != p)
        throw ConfigError(fmt::format("'{}.predictor_effects' has the wrong shape", prefix));
    }
    if (config.has(prefix + ".manifest_intercept"))
      gp.manifest_intercept = Eigen::VectorXd::Constant(
          m, config.number(prefix + ".manifest_intercept"));
    if (config.has(prefix + ".manifest_error_var"))
      gp.manifest_error_var = Eigen::VectorXd::Constant(
          m, config.number(prefix + ".manifest_error_var"));
    design.true_params.groups.push_back(std::move(gp));
  }

  // Predictor generators: per-channel sections with a default fallback.
  const bool has_default = config.has("predictor_process.default.kind");
  for (const auto& channel : design.model.predictor_channels) {
    const std::string prefix = "predictor_process." + channel;
    if (config.has(prefix + ".kind")) {
      design.predictor_process.push_back(generator_from(config, prefix));
    } else if (has_default) {
      design.predictor_process.push_back(
          generator_from(config, "predictor_process.default"));
    } else {
      throw ConfigError(fmt::format(
          "no predictor generator for channel '{}' and no predictor_process.default",
          channel));
    }
  }

  design.validate();
  return design;
}

}  // namespace ctpanel
