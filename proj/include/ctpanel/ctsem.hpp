#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctpanel/linalg.hpp"
#include "ctpanel/panel.hpp"

namespace ctpanel {

enum class DriftForm { Diagonal, Full };
enum class GroupingMode { Constrained, Free };

std::string to_string(DriftForm f);
std::string to_string(GroupingMode m);
DriftForm drift_form_from_string(const std::string& s);
GroupingMode grouping_from_string(const std::string& s);

struct CtModelSpec {
  int n_latent = 4;
  std::vector<std::string> latent_names;  // filled with defaults when empty
  int n_manifest = 1;
  std::vector<std::string> manifest_names;
  std::vector<std::string> predictor_channels;  // default: all 24 panel channels
  DriftForm drift_form = DriftForm::Diagonal;
  GroupingMode grouping = GroupingMode::Constrained;
  bool loadings_per_group = true;
  // Identification defaults: diffusion fixed to identity (latent scale) and
  // continuous intercept fixed to zero with a free manifest intercept. With a
  // single manifest the model is not identified otherwise.
  bool free_cint = false;     // estimate b (manifest intercept then fixed to 0)
  bool free_initial = false;  // estimate mu0/Sigma0 instead of the stationary ones

  int n_predictor() const { return static_cast<int>(predictor_channels.size()); }
  void fill_defaults();
  void validate() const;
};

/// The paper-shaped default: four latent functions, one manifest rating,
/// all 24 behavior channels as predictors.
CtModelSpec default_model_spec();

// Parameters of one group's model. In constrained fits every non-loading
// field is numerically identical across groups.
struct CtGroupParams {
  MatrixXd drift;                  // n_latent x n_latent, Re(eig) < 0
  VectorXd cont_intercept;         // n_latent
  MatrixXd diffusion_chol;         // n_latent x n_latent lower triangular
  MatrixXd predictor_effects;      // n_latent x n_predictor, impulse effects
  MatrixXd loadings;               // n_manifest x n_latent
  VectorXd manifest_intercept;     // n_manifest
  VectorXd manifest_error_var;     // n_manifest, diagonal of Theta
  std::optional<VectorXd> init_mean;  // nullopt: stationary -A^-1 b
  std::optional<MatrixXd> init_cov;   // nullopt: stationary covariance

  MatrixXd diffusion_cov() const {  // Q_cont = G G^T
    return diffusion_chol * diffusion_chol.transpose();
  }
  void validate(const CtModelSpec& spec) const;
};

struct CtParams {
  std::vector<CtGroupParams> groups;
};

// ---------------------------------------------------------------------------
// Dataset: one row of observations per (member, slice).
// ---------------------------------------------------------------------------

struct SubjectData {
  std::string member;
  std::string group_id;
  int group = 0;          // index into CtDataset::group_ids
  VectorXd times;         // strictly increasing slice midpoints
  MatrixXd predictors;    // n_predictor x T, missing values already zeroed
  MatrixXd manifest;      // n_manifest x T, NaN marks missing
};

struct CtDataset {
  std::vector<std::string> group_ids;
  std::vector<SubjectData> subjects;  // ordered by (group_id, member)
  std::vector<std::string> predictor_channels;
  std::vector<std::string> manifest_names;
  long missing_predictor_cells = 0;  // zero-imputed impulse cells
};

/// Pulls the model's predictor channels and the curiosity manifest out of
/// behavior panels. Missing predictors become zero impulses (counted);
/// missing manifests stay NaN and skip the measurement update.
CtDataset extract_dataset(std::span<const BehaviorPanel> panels,
                          const CtModelSpec& spec);

// ---------------------------------------------------------------------------
// Kalman filter likelihood.
// ---------------------------------------------------------------------------

/// Per-group quantities that do not depend on the data: stationary moments
/// and a dt-keyed cache of exact discretizations.
class GroupDynamics {
 public:
  explicit GroupDynamics(const CtGroupParams& params);

  const CtGroupParams& params() const { return *params_; }
  const MatrixXd& stationary_cov() const { return q_inf_; }
  const VectorXd& init_mean() const { return mu0_; }
  const MatrixXd& init_cov() const { return sigma0_; }
  const Discretized& discretized(double dt);

 private:
  const CtGroupParams* params_;
  MatrixXd q_cont_;
  MatrixXd q_inf_;
  VectorXd mu0_;
  MatrixXd sigma0_;
  std::map<double, Discretized> cache_;
};

struct FilteredStates {
  std::vector<VectorXd> predicted_mean, filtered_mean;
  std::vector<MatrixXd> predicted_cov, filtered_cov;
};

struct KalmanResult {
  double loglik = 0.0;
  long n_observations = 0;    // manifest values entering the likelihood
  long cov_floor_events = 0;  // PSD repairs of predicted covariances
  std::optional<FilteredStates> states;
};

struct KalmanOptions {
  bool store_states = false;
};

/// Standard predict/update recursion over one member's series. The predictor
/// impulse shifts the predicted mean at each observation time before the
/// measurement update; missing manifest entries skip (their components of)
/// the update. Throws NumericalError (with the slice position) when an
/// innovation covariance fails to be positive definite.
KalmanResult kalman_loglik(GroupDynamics& dynamics, const SubjectData& subject,
                           const KalmanOptions& options = {});

/// Convenience overload building the dynamics cache internally.
KalmanResult kalman_loglik(const CtGroupParams& params, const SubjectData& subject,
                           const KalmanOptions& options = {});

/// Sum of per-subject logliks in dataset order (fixed reduction order, so the
/// result is bit-identical for any worker count).
double total_loglik(const CtParams& params, const CtDataset& data, int threads = 1,
                    long* cov_floor_events = nullptr);

/// Akaike information criterion: 2k - 2 loglik.
double aic(double loglik, int n_free_params);

}  // namespace ctpanel
