#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "ctpanel/common.hpp"

namespace ctpanel {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  int max_iterations = 500;
  double rel_f_tol = 1e-7;   // relative objective change across iterations
  double grad_tol = 1e-6;    // scaled infinity norm of the gradient
  int threads = 1;           // workers for finite-difference evaluations
  double fd_rel_step = 6e-6; // central-difference step, scaled by 1 + |x_i|
  int max_line_search = 40;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd gradient;
  bool converged = false;
  int iterations = 0;
  long n_evaluations = 0;
  std::string message;
};

/// Central finite-difference gradient with per-component step
/// h_i = rel_step * (1 + |x_i|). Component evaluations run in parallel and
/// land in fixed slots, so the result does not depend on the worker count.
Eigen::VectorXd central_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                            double rel_step, int threads,
                                            long* n_evaluations = nullptr);

/// Dense BFGS with backtracking-Armijo line search and curvature-guarded
/// inverse Hessian updates. Objectives may return +inf to reject a point;
/// the line search backs off. Gradients are numeric central differences.
OptimResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                          const OptimOptions& options = {});

/// Dense Hessian via central second differences,
/// h_i = (machine eps)^(1/4) * (1 + |x_i|).
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x,
                                int threads = 1);

}  // namespace ctpanel
