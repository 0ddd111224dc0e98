#include "ctpanel/optim.hpp"

#include <cmath>
#include <limits>

namespace ctpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd central_difference_gradient(const Objective& f, const VectorXd& x,
                                     double rel_step, int threads,
                                     long* n_evaluations) {
  const auto p = static_cast<std::size_t>(x.size());
  VectorXd grad(x.size());
  parallel_for(p, threads, [&](std::size_t i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const double h = rel_step * (1.0 + std::abs(x(idx)));
    VectorXd xp = x, xm = x;
    xp(idx) += h;
    xm(idx) -= h;
    grad(idx) = (f(xp) - f(xm)) / (2.0 * h);
  });
  if (n_evaluations) *n_evaluations += 2 * static_cast<long>(p);
  return grad;
}

OptimResult minimize_bfgs(const Objective& f, const VectorXd& x0,
                          const OptimOptions& options) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Eigen::Index p = x0.size();

  OptimResult result;
  result.x = x0;
  result.f = f(x0);
  result.n_evaluations = 1;
  if (!std::isfinite(result.f)) {
    result.message = "objective not finite at the starting point";
    return result;
  }

  VectorXd grad = central_difference_gradient(f, result.x, options.fd_rel_step,
                                              options.threads, &result.n_evaluations);
  MatrixXd h_inv = MatrixXd::Identity(p, p);
  bool h_scaled = false;
  int small_change_streak = 0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;

    if (grad.lpNorm<Eigen::Infinity>() <= options.grad_tol * (1.0 + std::abs(result.f))) {
      result.converged = true;
      result.message = "gradient norm below tolerance";
      break;
    }

    VectorXd direction = -(h_inv * grad);
    double slope = direction.dot(grad);
    if (!(slope < 0.0)) {  // reset a corrupted curvature model
      h_inv.setIdentity();
      direction = -grad;
      slope = direction.dot(grad);
      if (!(slope < 0.0)) {
        result.message = "zero gradient direction";
        result.converged = true;
        break;
      }
    }

    // Backtracking Armijo with quadratic interpolation.
    constexpr double c1 = 1e-4;
    double step = 1.0;
    if (iter == 0) step = std::min(1.0, 1.0 / (1.0 + direction.norm()));
    double f_new = kInf;
    VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_new = result.x + step * direction;
      f_new = f(x_new);
      ++result.n_evaluations;
      if (std::isfinite(f_new) && f_new <= result.f + c1 * step * slope) {
        accepted = true;
        break;
      }
      double next = 0.5 * step;
      if (std::isfinite(f_new)) {
        // Minimizer of the quadratic through f, slope and f_new.
        const double denom = 2.0 * (f_new - result.f - step * slope);
        if (denom > 0.0) {
          const double q = -slope * step * step / denom;
          if (q > 0.05 * step && q < 0.95 * step) next = q;
        }
      }
      step = next;
    }
    if (!accepted) {
      result.message = "line search failed";
      break;
    }

    VectorXd grad_new = central_difference_gradient(
        f, x_new, options.fd_rel_step, options.threads, &result.n_evaluations);

    const VectorXd s = x_new - result.x;
    const VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (!h_scaled) {
        // Shanno-Phua scaling of the initial inverse Hessian.
        h_inv = (sy / y.squaredNorm()) * MatrixXd::Identity(p, p);
        h_scaled = true;
      }
      const double rho = 1.0 / sy;
      const MatrixXd eye = MatrixXd::Identity(p, p);
      const MatrixXd left = eye - rho * s * y.transpose();
      h_inv = (left * h_inv * left.transpose() + rho * s * s.transpose()).eval();
    }

    const double f_prev = result.f;
    result.x = x_new;
    result.f = f_new;
    grad = grad_new;

    // Two consecutive near-flat objective changes end the run; a single one
    // can just be a cautious line-search step.
    if (std::abs(f_prev - f_new) <= options.rel_f_tol * (std::abs(f_prev) + 1.0)) {
      if (++small_change_streak >= 2) {
        result.converged = true;
        result.message = "relative objective change below tolerance";
        break;
      }
    } else {
      small_change_streak = 0;
    }
  }

  if (result.message.empty()) result.message = "maximum iterations reached";
  result.gradient = grad;
  return result;
}

MatrixXd numeric_hessian(const Objective& f, const VectorXd& x, int threads) {
  const Eigen::Index p = x.size();
  const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  VectorXd h(p);
  for (Eigen::Index i = 0; i < p; ++i) h(i) = base * (1.0 + std::abs(x(i)));

  const double f0 = f(x);
  MatrixXd hess(p, p);

  // Diagonal entries.
  std::vector<double> fp(static_cast<std::size_t>(p)), fm(static_cast<std::size_t>(p));
  parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t iu) {
    const auto i = static_cast<Eigen::Index>(iu);
    VectorXd xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    fp[iu] = f(xp);
    fm[iu] = f(xm);
  });
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    hess(i, i) = (fp[iu] - 2.0 * f0 + fm[iu]) / (h(i) * h(i));
  }

  // Off-diagonal entries via the four-point cross stencil.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  std::vector<double> cross(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
    xpp(i) += h(i); xpp(j) += h(j);
    xpm(i) += h(i); xpm(j) -= h(j);
    xmp(i) -= h(i); xmp(j) += h(j);
    xmm(i) -= h(i); xmm(j) -= h(j);
    cross[k] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h(i) * h(j));
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    hess(pairs[k].first, pairs[k].second) = cross[k];
    hess(pairs[k].second, pairs[k].first) = cross[k];
  }
  return hess;
}

}  // namespace ctpanel
