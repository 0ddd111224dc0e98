#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctpanel/ctsem.hpp"
#include "ctpanel/optim.hpp"

namespace ctpanel {

enum class ParamTransform { Identity, NegExp, Exp };

struct ParamEntry {
  std::string name;
  ParamTransform transform = ParamTransform::Identity;
  int group = -1;  // -1: shared across groups
  enum class Field {
    DriftDiag,
    DriftOff,
    ContIntercept,
    PredictorEffect,
    Loading,
    ManifestIntercept,
    ManifestLogVar,
    InitMean,
    InitCovDiag,
    InitCovOff,
  } field = Field::DriftDiag;
  int i = 0, j = 0;
};

// Maps between the free-parameter vector seen by the optimizer (transformed
// scale) and CtParams (natural scale). Transforms: drift diagonal -exp(x)
// keeps the drift stable in diagonal form, variances exp(x) stay positive.
// Diffusion is pinned to the identity and the continuous intercept to zero
// unless the spec frees them; see CtModelSpec.
class ParamLayout {
 public:
  static ParamLayout build(const CtModelSpec& spec,
                           const std::vector<std::string>& group_labels);

  Eigen::Index size() const { return static_cast<Eigen::Index>(entries_.size()); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const CtModelSpec& spec() const { return spec_; }

  CtParams unpack(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack(const CtParams& params) const;

  /// d(natural)/d(transformed) at one coordinate, for delta-method errors.
  static double natural_derivative(double x, ParamTransform t);
  static double to_natural(double x, ParamTransform t);
  static double to_transformed(double value, ParamTransform t);

 private:
  CtModelSpec spec_;
  std::vector<std::string> group_labels_;
  std::vector<ParamEntry> entries_;
};

struct FitOptions {
  int starts = 5;
  std::uint64_t seed = 12021;
  double rel_tol = 1e-7;
  int max_iterations = 500;
  int threads = 0;  // 0: hardware concurrency
  bool compute_se = true;
  std::optional<GroupingMode> mode_override;  // CLI --mode
};

struct ParamSummary {
  std::string name;
  double estimate = 0.0;           // natural scale
  std::optional<double> std_error; // natural scale, missing when the Hessian
                                   // is singular
};

struct StdEffect {
  std::string source;
  std::string target;
  bool latent_to_manifest = false;
  std::vector<double> per_group;
  std::optional<double> mean;  // missing for zero-variance channels
  double sd = 0.0;             // across groups (sample sd, 0 for one group)
  bool flagged = false;
};

struct StdTable {
  std::vector<StdEffect> effects;
  std::vector<std::string> warnings;
};

struct FitResult {
  CtModelSpec spec;
  GroupingMode mode = GroupingMode::Constrained;
  std::vector<std::string> group_ids;
  CtParams params;
  double loglik = 0.0;
  int n_free_params = 0;
  double aic = 0.0;
  std::vector<ParamSummary> parameters;
  bool converged = false;
  int iterations = 0;
  long n_evaluations = 0;
  long cov_floor_events = 0;
  std::uint64_t seed = 0;
  int starts = 0;
  StdTable standardized;
};

/// Maximum-likelihood fit via multi-start BFGS over the transformed
/// parameters. Constrained mode shares everything but the loadings across
/// groups; free mode estimates each group separately (the joint likelihood
/// factorizes over groups, so the optima coincide with a joint search).
FitResult fit(const CtModelSpec& spec, const CtDataset& data,
              const FitOptions& options = {});

/// Standardized effects: predictor->latent effects scaled by
/// sd(predictor)/sd_stationary(latent), latent->manifest loadings by
/// sd_stationary(latent)/sd(manifest). Empirical sds pool over all subjects;
/// zero-variance channels yield missing effects and a warning.
StdTable standardize(const FitResult& result, const CtDataset& data);

struct LinkEdge {
  std::string source;
  std::string target;
  double estimate = 0.0;  // standardized, mean across groups
  double sd = 0.0;
  int rank = 0;
  bool latent_to_manifest = false;
};

struct LinkReport {
  std::vector<LinkEdge> edges;
};

/// Per latent target keeps the top_k behavior edges by |standardized
/// estimate| (ties by source name); all latent->manifest edges are kept and
/// ranked. Effects with missing estimates are skipped.
LinkReport rank_links(const StdTable& table, int top_k_per_latent = 1);

}  // namespace ctpanel
