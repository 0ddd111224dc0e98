#include "ctpanel/ctsem.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ctpanel/channels.hpp"

namespace ctpanel {

std::string to_string(DriftForm f) {
  return f == DriftForm::Diagonal ? "diagonal" : "full";
}

std::string to_string(GroupingMode m) {
  return m == GroupingMode::Constrained ? "constrained" : "free";
}

DriftForm drift_form_from_string(const std::string& s) {
  if (s == "diagonal") return DriftForm::Diagonal;
  if (s == "full") return DriftForm::Full;
  throw ConfigError(fmt::format("unknown drift form '{}' (diagonal|full)", s));
}

GroupingMode grouping_from_string(const std::string& s) {
  if (s == "constrained") return GroupingMode::Constrained;
  if (s == "free") return GroupingMode::Free;
  throw ConfigError(fmt::format("unknown grouping mode '{}' (constrained|free)", s));
}

void CtModelSpec::fill_defaults() {
  if (latent_names.empty()) {
    if (n_latent == 4) {
      latent_names = {"ind_KIA", "inter_KIA", "ind_intensify", "inter_intensify"};
    } else {
      for (int i = 0; i < n_latent; ++i)
        latent_names.push_back(fmt::format("latent{}", i + 1));
    }
  }
  if (manifest_names.empty()) {
    manifest_names.push_back("curiosity");
    for (int i = 1; i < n_manifest; ++i)
      manifest_names.push_back(fmt::format("manifest{}", i + 1));
  }
  if (predictor_channels.empty())
    for (int c = 0; c < kNumChannels; ++c)
      predictor_channels.push_back(channel_name(c));
  n_latent = static_cast<int>(latent_names.size());
  n_manifest = static_cast<int>(manifest_names.size());
}

void CtModelSpec::validate() const {
  if (n_latent < 1) throw ConfigError("model.n_latent must be >= 1");
  if (n_manifest < 1) throw ConfigError("model.n_manifest must be >= 1");
  if (predictor_channels.empty())
    throw ConfigError("model.predictors must be non-empty");
  if (static_cast<int>(latent_names.size()) != n_latent)
    throw ConfigError("model.latents size does not match n_latent");
  std::set<std::string> seen;
  for (const auto& name : latent_names)
    if (!seen.insert(name).second)
      throw ConfigError(fmt::format("duplicate latent name '{}'", name));
  seen.clear();
  for (const auto& name : predictor_channels)
    if (!seen.insert(name).second)
      throw ConfigError(fmt::format("duplicate predictor channel '{}'", name));
}

CtModelSpec default_model_spec() {
  CtModelSpec spec;
  spec.fill_defaults();
  spec.validate();
  return spec;
}

void CtGroupParams::validate(const CtModelSpec& spec) const {
  const int n = spec.n_latent, m = spec.n_manifest, p = spec.n_predictor();
  auto dims = [&](const MatrixXd& M, int r, int c, const char* what) {
    if (M.rows() != r || M.cols() != c)
      throw ConfigError(fmt::format("{}: expected {}x{}, got {}x{}", what, r, c,
                                    M.rows(), M.cols()));
  };
  dims(drift, n, n, "drift");
  dims(diffusion_chol, n, n, "diffusion_chol");
  dims(predictor_effects, n, p, "predictor_effects");
  dims(loadings, m, n, "loadings");
  if (cont_intercept.size() != n) throw ConfigError("cont_intercept: wrong size");
  if (manifest_intercept.size() != m) throw ConfigError("manifest_intercept: wrong size");
  if (manifest_error_var.size() != m) throw ConfigError("manifest_error_var: wrong size");
  if ((manifest_error_var.array() < 0.0).any())
    throw ConfigError("manifest_error_var must be >= 0");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (diffusion_chol(i, j) != 0.0)
        throw ConfigError("diffusion_chol must be lower triangular");
  if (!is_stable_drift(drift))
    throw NumericalError("drift matrix is not stable (Re(eig) >= 0)");
  if (init_mean && init_mean->size() != n) throw ConfigError("init_mean: wrong size");
  if (init_cov && (init_cov->rows() != n || init_cov->cols() != n))
    throw ConfigError("init_cov: wrong shape");
}

CtDataset extract_dataset(std::span<const BehaviorPanel> panels,
                          const CtModelSpec& spec) {
  if (spec.n_manifest != 1)
    throw ConfigError("panel datasets carry a single manifest (curiosity)");
  std::vector<int> channel_ids;
  for (const auto& name : spec.predictor_channels) {
    const auto idx = channel_index(name);
    if (!idx)
      throw ConfigError(fmt::format("unknown predictor channel '{}'", name));
    channel_ids.push_back(*idx);
  }

  CtDataset data;
  data.predictor_channels = spec.predictor_channels;
  data.manifest_names = spec.manifest_names;

  std::vector<const BehaviorPanel*> ordered;
  for (const auto& p : panels) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const BehaviorPanel* a, const BehaviorPanel* b) {
                     return a->group_id < b->group_id;
                   });

  std::map<std::string, int> group_index;
  for (const auto* panel : ordered) {
    if (!group_index.count(panel->group_id)) {
      group_index[panel->group_id] = static_cast<int>(data.group_ids.size());
      data.group_ids.push_back(panel->group_id);
    }
  }

  for (const auto* panel : ordered) {
    std::vector<const MemberSeries*> members;
    for (const auto& m : panel->members) members.push_back(&m);
    std::sort(members.begin(), members.end(),
              [](const MemberSeries* a, const MemberSeries* b) {
                return a->member < b->member;
              });
    for (const auto* series : members) {
      const auto T = static_cast<Eigen::Index>(series->records.size());
      SubjectData subject;
      subject.member = series->member;
      subject.group_id = panel->group_id;
      subject.group = group_index[panel->group_id];
      subject.times.resize(T);
      subject.predictors = MatrixXd::Zero(static_cast<Eigen::Index>(channel_ids.size()), T);
      subject.manifest.setConstant(1, T, std::numeric_limits<double>::quiet_NaN());
      double prev = -std::numeric_limits<double>::infinity();
      for (Eigen::Index t = 0; t < T; ++t) {
        const auto& rec = series->records[static_cast<std::size_t>(t)];
        if (!(rec.time > prev))
          throw DataError(fmt::format("non-increasing slice times for member '{}'",
                                      series->member));
        prev = rec.time;
        subject.times(t) = rec.time;
        for (std::size_t c = 0; c < channel_ids.size(); ++c) {
          const auto& value = rec.channels[static_cast<std::size_t>(channel_ids[c])];
          if (value) {
            subject.predictors(static_cast<Eigen::Index>(c), t) = *value;
          } else {
            ++data.missing_predictor_cells;
          }
        }
        if (rec.curiosity) subject.manifest(0, t) = *rec.curiosity;
      }
      data.subjects.push_back(std::move(subject));
    }
  }
  return data;
}

// ---------------------------------------------------------------------------

GroupDynamics::GroupDynamics(const CtGroupParams& params) : params_(&params) {
  q_cont_ = params.diffusion_cov();
  q_inf_ = stationary_covariance(params.drift, q_cont_);
  if (params.init_mean) {
    mu0_ = *params.init_mean;
  } else {
    // Stationary mean solves A mu + b = 0.
    mu0_ = params.drift.partialPivLu().solve(-params.cont_intercept);
  }
  sigma0_ = params.init_cov ? *params.init_cov : q_inf_;
}

const Discretized& GroupDynamics::discretized(double dt) {
  auto it = cache_.find(dt);
  if (it == cache_.end()) {
    it = cache_
             .emplace(dt, discretize_dynamics(params_->drift, params_->cont_intercept,
                                              q_inf_, dt, /*q_inf_given=*/true))
             .first;
  }
  return it->second;
}

namespace {

struct ObservedSlice {
  // Indices of non-missing manifest components at one time point.
  std::vector<Eigen::Index> idx;
};

}  // namespace

KalmanResult kalman_loglik(GroupDynamics& dynamics, const SubjectData& subject,
                           const KalmanOptions& options) {
  const auto& p = dynamics.params();
  const Eigen::Index n = p.drift.rows();
  const Eigen::Index m = p.loadings.rows();
  const Eigen::Index T = subject.times.size();
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;

  KalmanResult result;
  if (options.store_states) result.states.emplace();
  if (T == 0) return result;

  if (subject.predictors.cols() != T || subject.manifest.cols() != T)
    throw DataError("subject predictor/manifest length mismatch");
  if (subject.predictors.rows() != p.predictor_effects.cols())
    throw DataError("subject predictor count does not match the model");

  VectorXd mean = dynamics.init_mean();
  MatrixXd cov = dynamics.init_cov();

  // Scalar-manifest fast path: the fit spends nearly all its time here, so
  // the loop reuses preallocated buffers and avoids Eigen temporaries.
  if (m == 1 && !options.store_states) {
    const VectorXd lambda = p.loadings.row(0).transpose();
    const double tau = p.manifest_intercept(0);
    const double theta = p.manifest_error_var(0);
    VectorXd mean_next(n), pl(n);
    MatrixXd tmp_nn(n, n), cov_next(n, n);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (t > 0) {
        const double dt = subject.times(t) - subject.times(t - 1);
        if (!(dt > 0.0))
          throw DataError(fmt::format("non-increasing times at slice {}", t));
        const Discretized& d = dynamics.discretized(dt);
        mean_next.noalias() = d.A_d * mean;
        mean = mean_next + d.b_d;
        tmp_nn.noalias() = d.A_d * cov;
        cov_next.noalias() = tmp_nn * d.A_d.transpose();
        cov_next += d.Q_d;
        cov.swap(cov_next);
      }
      mean.noalias() += p.predictor_effects * subject.predictors.col(t);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double avg = 0.5 * (cov(i, j) + cov(j, i));
          cov(i, j) = avg;
          cov(j, i) = avg;
        }

      const double y = subject.manifest(0, t);
      if (std::isnan(y)) continue;
      pl.noalias() = cov * lambda;
      double s = lambda.dot(pl) + theta;
      if (!(s > 0.0) || !std::isfinite(s)) {
        long floored = 0;
        cov = psd_project(cov, &floored);
        result.cov_floor_events += std::max(floored, 1L);
        pl.noalias() = cov * lambda;
        s = lambda.dot(pl) + theta;
        if (!(s > 0.0) || !std::isfinite(s))
          throw NumericalError(fmt::format(
              "non-positive innovation variance at slice {} (member '{}')", t,
              subject.member));
      }
      const double v = y - tau - lambda.dot(mean);
      result.loglik += -0.5 * (kLog2Pi + std::log(s) + v * v / s);
      mean.noalias() += (v / s) * pl;
      // (I - K H) P = P - (P lambda)(P lambda)^T / s for symmetric P.
      cov.noalias() -= pl * pl.transpose() / s;
      result.n_observations += 1;
    }
    return result;
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) {
      const double dt = subject.times(t) - subject.times(t - 1);
      if (!(dt > 0.0))
        throw DataError(fmt::format("non-increasing times at slice {}", t));
      const Discretized& d = dynamics.discretized(dt);
      mean = (d.A_d * mean + d.b_d).eval();
      cov = (d.A_d * cov * d.A_d.transpose() + d.Q_d).eval();
    }
    // Behavior impulse at the observation time.
    mean.noalias() += p.predictor_effects * subject.predictors.col(t);
    cov = 0.5 * (cov + cov.transpose()).eval();

    if (options.store_states) {
      result.states->predicted_mean.push_back(mean);
      result.states->predicted_cov.push_back(cov);
    }

    // Observed manifest components at this time.
    ObservedSlice obs;
    for (Eigen::Index j = 0; j < m; ++j)
      if (!std::isnan(subject.manifest(j, t))) obs.idx.push_back(j);

    if (!obs.idx.empty()) {
      const auto d = static_cast<Eigen::Index>(obs.idx.size());
      MatrixXd H(d, n);
      VectorXd v(d);
      VectorXd theta(d);
      for (Eigen::Index r = 0; r < d; ++r) {
        const Eigen::Index j = obs.idx[static_cast<std::size_t>(r)];
        H.row(r) = p.loadings.row(j);
        v(r) = subject.manifest(j, t) - p.manifest_intercept(j);
        theta(r) = p.manifest_error_var(j);
      }
      v.noalias() -= H * mean;

      if (d == 1) {
        double s = (H * cov * H.transpose())(0, 0) + theta(0);
        if (!(s > 0.0) || !std::isfinite(s)) {
          // One repair attempt: floor the predicted covariance at PSD.
          long floored = 0;
          cov = psd_project(cov, &floored);
          result.cov_floor_events += std::max(floored, 1L);
          s = (H * cov * H.transpose())(0, 0) + theta(0);
          if (!(s > 0.0) || !std::isfinite(s))
            throw NumericalError(fmt::format(
                "non-positive innovation variance at slice {} (member '{}')", t,
                subject.member));
        }
        const VectorXd K = cov * H.transpose() / s;
        result.loglik += -0.5 * (kLog2Pi + std::log(s) + v(0) * v(0) / s);
        mean.noalias() += K * v(0);
        cov = ((MatrixXd::Identity(n, n) - K * H) * cov).eval();
        result.n_observations += 1;
      } else {
        MatrixXd S = H * cov * H.transpose();
        S.diagonal() += theta;
        Eigen::LLT<MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) {
          long floored = 0;
          cov = psd_project(cov, &floored);
          result.cov_floor_events += std::max(floored, 1L);
          S = H * cov * H.transpose();
          S.diagonal() += theta;
          llt.compute(S);
          if (llt.info() != Eigen::Success)
            throw NumericalError(fmt::format(
                "innovation covariance not positive definite at slice {} (member '{}')",
                t, subject.member));
        }
        const MatrixXd L = llt.matrixL();
        double logdet = 0.0;
        for (Eigen::Index r = 0; r < d; ++r) logdet += 2.0 * std::log(L(r, r));
        const VectorXd alpha = llt.solve(v);
        result.loglik += -0.5 * (d * kLog2Pi + logdet + v.dot(alpha));
        const MatrixXd K = llt.solve(H * cov).transpose();
        mean.noalias() += K * v;
        cov = ((MatrixXd::Identity(n, n) - K * H) * cov).eval();
        result.n_observations += d;
      }
      cov = 0.5 * (cov + cov.transpose()).eval();
    }

    if (options.store_states) {
      result.states->filtered_mean.push_back(mean);
      result.states->filtered_cov.push_back(cov);
    }
  }
  return result;
}

KalmanResult kalman_loglik(const CtGroupParams& params, const SubjectData& subject,
                           const KalmanOptions& options) {
  GroupDynamics dynamics(params);
  return kalman_loglik(dynamics, subject, options);
}

double total_loglik(const CtParams& params, const CtDataset& data, int threads,
                    long* cov_floor_events) {
  if (params.groups.size() != data.group_ids.size())
    throw ConfigError("parameter groups do not match dataset groups");

  // One dynamics cache per group; subjects of a group share it. The caches
  // are mutated when new dt values appear, so parallel workers get their own.
  std::vector<double> logliks(data.subjects.size(), 0.0);
  std::vector<long> floors(data.subjects.size(), 0);

  if (threads <= 1) {
    std::vector<GroupDynamics> dynamics;
    dynamics.reserve(params.groups.size());
    for (const auto& g : params.groups) dynamics.emplace_back(g);
    for (std::size_t i = 0; i < data.subjects.size(); ++i) {
      const auto& subject = data.subjects[i];
      const auto r = kalman_loglik(dynamics[static_cast<std::size_t>(subject.group)],
                                   subject, {});
      logliks[i] = r.loglik;
      floors[i] = r.cov_floor_events;
    }
  } else {
    parallel_for(data.subjects.size(), threads, [&](std::size_t i) {
      const auto& subject = data.subjects[i];
      GroupDynamics dyn(params.groups[static_cast<std::size_t>(subject.group)]);
      const auto r = kalman_loglik(dyn, subject, {});
      logliks[i] = r.loglik;
      floors[i] = r.cov_floor_events;
    });
  }

  double total = 0.0;
  long floor_total = 0;
  for (std::size_t i = 0; i < logliks.size(); ++i) {
    total += logliks[i];
    floor_total += floors[i];
  }
  if (cov_floor_events) *cov_floor_events = floor_total;
  return total;
}

double aic(double loglik, int n_free_params) {
  if (n_free_params < 0) throw ConfigError("aic: k must be >= 0");
  return 2.0 * n_free_params - 2.0 * loglik;
}

}  // namespace ctpanel
