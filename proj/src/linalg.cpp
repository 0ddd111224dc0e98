#include "ctpanel/linalg.hpp"

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

namespace ctpanel {

double max_eigenvalue_real_part(const MatrixXd& A) {
  return A.eigenvalues().real().maxCoeff();
}

bool is_stable_drift(const MatrixXd& A, double margin) {
  return max_eigenvalue_real_part(A) < -margin;
}

MatrixXd stationary_covariance(const MatrixXd& A, const MatrixXd& Q_cont) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q_cont.rows() != n || Q_cont.cols() != n)
    throw NumericalError("stationary_covariance: dimension mismatch");
  if (!A.allFinite() || !Q_cont.allFinite())
    throw NumericalError("stationary_covariance: non-finite input");
  if (!is_stable_drift(A))
    throw NumericalError(fmt::format(
        "stationary_covariance: drift is not stable (max Re(eig) = {:.6g})",
        max_eigenvalue_real_part(A)));

  // vec(A Q + Q A^T) = (I (x) A + A (x) I) vec(Q) = -vec(Q_cont)
  const Eigen::Index n2 = n * n;
  MatrixXd K = MatrixXd::Zero(n2, n2);
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l) {
          // column-major vec: entry (i + j*n) of vec(Q) is Q(i, j)
          const Eigen::Index row = i + j * n;
          const Eigen::Index col = k + l * n;
          K(row, col) = I(j, l) * A(i, k) + A(j, l) * I(i, k);
        }

  VectorXd rhs(n2);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) rhs(i + j * n) = -Q_cont(i, j);

  const VectorXd q = K.partialPivLu().solve(rhs);
  MatrixXd Q(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) Q(i, j) = q(i + j * n);
  return 0.5 * (Q + Q.transpose());
}

Discretized discretize_dynamics(const MatrixXd& A, const VectorXd& b,
                                const MatrixXd& Q_inf, double dt, bool q_inf_given) {
  const Eigen::Index n = A.rows();
  if (!A.allFinite() || !b.allFinite() || !Q_inf.allFinite() || !std::isfinite(dt))
    throw NumericalError("discretize_dynamics: non-finite input");
  if (dt < 0.0) throw NumericalError("discretize_dynamics: negative dt");

  Discretized out;
  if (dt == 0.0) {
    out.A_d = MatrixXd::Identity(n, n);
    out.b_d = VectorXd::Zero(n);
    out.Q_d = MatrixXd::Zero(n, n);
    return out;
  }

  // Augmented exponential exp([[A, b], [0, 0]] dt) carries the intercept
  // without an explicit inverse of A.
  MatrixXd aug = MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A * dt;
  aug.topRightCorner(n, 1) = b * dt;
  const MatrixXd aug_exp = aug.exp();
  out.A_d = aug_exp.topLeftCorner(n, n);
  out.b_d = aug_exp.topRightCorner(n, 1);

  const MatrixXd Qi = q_inf_given ? Q_inf : stationary_covariance(A, Q_inf);
  out.Q_d = Qi - out.A_d * Qi * out.A_d.transpose();
  out.Q_d = 0.5 * (out.Q_d + out.Q_d.transpose()).eval();
  return out;
}

Discretized discretize_dynamics(const MatrixXd& A, const VectorXd& b,
                                const MatrixXd& Q_cont, double dt) {
  return discretize_dynamics(A, b, Q_cont, dt, /*q_inf_given=*/false);
}

MatrixXd psd_project(const MatrixXd& M, long* floored) {
  MatrixXd sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  const VectorXd vals = es.eigenvalues();
  long clipped = 0;
  VectorXd adj = vals;
  for (Eigen::Index i = 0; i < adj.size(); ++i)
    if (adj(i) < 0.0) {
      adj(i) = 0.0;
      ++clipped;
    }
  if (floored) *floored = clipped;
  if (clipped == 0) return sym;
  return es.eigenvectors() * adj.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace ctpanel
