#pragma once

#include <Eigen/Dense>

#include "ctpanel/common.hpp"

namespace ctpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Largest real part among the eigenvalues of A.
double max_eigenvalue_real_part(const MatrixXd& A);

/// All eigenvalue real parts strictly below -margin.
bool is_stable_drift(const MatrixXd& A, double margin = 0.0);

/// Stationary covariance of dx = A x dt + G dW with Q_cont = G G^T: solves
/// A Q + Q A^T + Q_cont = 0 through the Kronecker-sum linear system.
/// Throws NumericalError when A is not stable.
MatrixXd stationary_covariance(const MatrixXd& A, const MatrixXd& Q_cont);

struct Discretized {
  MatrixXd A_d;  // exp(A dt)
  VectorXd b_d;  // A^-1 (A_d - I) b, via augmented exponential
  MatrixXd Q_d;  // Q_inf - A_d Q_inf A_d^T
};

/// Exact discretization of the latent SDE over an interval dt. dt = 0 yields
/// (I, 0, 0). The intercept uses the augmented matrix exponential, so drift
/// matrices that are singular in the limit stay well-defined; the process
/// noise uses the stationary covariance, which requires a stable drift for
/// dt > 0.
Discretized discretize_dynamics(const MatrixXd& A, const VectorXd& b,
                                const MatrixXd& Q_cont, double dt);

/// Same, reusing a precomputed stationary covariance.
Discretized discretize_dynamics(const MatrixXd& A, const VectorXd& b,
                                const MatrixXd& Q_inf_precomputed, double dt,
                                bool q_inf_given);

/// Symmetric PSD projection: symmetrize and clip negative eigenvalues at
/// zero. Returns the number of clipped eigenvalues through `floored`.
MatrixXd psd_project(const MatrixXd& M, long* floored = nullptr);

}  // namespace ctpanel
