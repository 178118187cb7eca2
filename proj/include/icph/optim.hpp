#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "icph/errors.hpp"

namespace icph {

using Objective = std::function<double(const Eigen::VectorXd&)>;

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Evaluates f, mapping exceptions and non-finite results to +inf so that
/// line searches simply reject such points.
inline double eval_or_inf(const Objective& f, const Eigen::VectorXd& x) {
  try {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  } catch (const Error&) {
    return kInf;
  }
}

}  // namespace detail

/// Central-difference gradient with per-coordinate step
/// h_i = scale * eps^(1/3) * max(1, |x_i|). Falls back to a one-sided
/// difference when one side of the stencil is not evaluable.
inline Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x,
                                   double scale = 1.0) {
  const int n = static_cast<int>(x.size());
  const double eps13 = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::VectorXd grad(n);
  Eigen::VectorXd point = x;
  const double fx = detail::eval_or_inf(f, x);
  for (int i = 0; i < n; ++i) {
    const double h = scale * eps13 * std::max(1.0, std::fabs(x(i)));
    point(i) = x(i) + h;
    const double fp = detail::eval_or_inf(f, point);
    point(i) = x(i) - h;
    const double fm = detail::eval_or_inf(f, point);
    point(i) = x(i);
    if (std::isfinite(fp) && std::isfinite(fm)) {
      grad(i) = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp) && std::isfinite(fx)) {
      grad(i) = (fp - fx) / h;
    } else if (std::isfinite(fm) && std::isfinite(fx)) {
      grad(i) = (fx - fm) / h;
    } else {
      throw NonFiniteObjective("fd_gradient: objective not evaluable near x");
    }
  }
  return grad;
}

/// Central-difference Hessian with steps h_i = eps^(1/4) * max(1, |x_i|),
/// symmetric by construction.
inline Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const double eps14 =
      std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  Eigen::VectorXd h(n);
  for (int i = 0; i < n; ++i) h(i) = eps14 * std::max(1.0, std::fabs(x(i)));

  const double fx = f(x);
  if (!std::isfinite(fx)) throw NonFiniteObjective("fd_hessian: f(x) not finite");

  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd p = x;
  for (int i = 0; i < n; ++i) {
    p(i) = x(i) + h(i);
    const double fp = f(p);
    p(i) = x(i) - h(i);
    const double fm = f(p);
    p(i) = x(i);
    hess(i, i) = (fp - 2.0 * fx + fm) / (h(i) * h(i));
    for (int j = i + 1; j < n; ++j) {
      p(i) = x(i) + h(i);
      p(j) = x(j) + h(j);
      const double fpp = f(p);
      p(j) = x(j) - h(j);
      const double fpm = f(p);
      p(i) = x(i) - h(i);
      const double fmm = f(p);
      p(j) = x(j) + h(j);
      const double fmp = f(p);
      p(i) = x(i);
      p(j) = x(j);
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  if (!hess.allFinite()) throw NonFiniteObjective("fd_hessian: non-finite entries");
  return hess;
}

struct OptimOptions {
  int max_iterations = 300;
  double rel_tol = 1e-10;  // relative objective change
  double grad_tol = 1e-6;  // inf-norm of gradient, scaled by max(1, |f|)
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = detail::kInf;
  int iterations = 0;
  bool converged = false;
};

/// BFGS minimizer with finite-difference gradients and Armijo backtracking.
inline OptimResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                 const OptimOptions& options = {}) {
  const int n = static_cast<int>(x0.size());
  OptimResult result;
  result.x = x0;
  result.value = detail::eval_or_inf(f, x0);
  if (!std::isfinite(result.value)) {
    throw NonFiniteObjective("minimize_bfgs: objective not finite at start");
  }
  if (n == 0) {
    result.converged = true;
    return result;
  }

  Eigen::MatrixXd inv_hess = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad = fd_gradient(f, result.x);
  bool first_update = true;
  bool stalled_once = false;  // convergence needs two stalls in a row, with a
                              // fresh Hessian tried in between

  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    Eigen::VectorXd direction = -(inv_hess * grad);
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      inv_hess.setIdentity();
      direction = -grad;
      slope = grad.dot(direction);
      if (!(slope < 0.0)) {
        result.converged = true;  // gradient numerically zero
        break;
      }
    }

    // Armijo backtracking.
    double step = 1.0;
    double fnew = detail::kInf;
    Eigen::VectorXd xnew;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xnew = result.x + step * direction;
      fnew = detail::eval_or_inf(f, xnew);
      if (fnew <= result.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No progress along this direction; treat as converged at machine scale.
      result.converged = true;
      break;
    }

    Eigen::VectorXd grad_new = fd_gradient(f, xnew);
    const Eigen::VectorXd s = xnew - result.x;
    const Eigen::VectorXd yv = grad_new - grad;
    const double sy = s.dot(yv);

    const double improvement = result.value - fnew;
    result.x = xnew;
    result.value = fnew;
    grad = grad_new;

    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (first_update) {
        inv_hess *= sy / yv.squaredNorm();
        first_update = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hess * yv;
      // BFGS inverse update.
      inv_hess += (sy + yv.dot(hy)) * rho * rho * (s * s.transpose());
      inv_hess -= rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (grad.lpNorm<Eigen::Infinity>() <=
        options.grad_tol * std::max(1.0, std::fabs(result.value))) {
      result.converged = true;
      break;
    }
    if (improvement <= options.rel_tol * (std::fabs(result.value) + 1e-12)) {
      if (stalled_once) {
        result.converged = true;
        break;
      }
      stalled_once = true;
      inv_hess.setIdentity();
      first_update = true;
    } else {
      stalled_once = false;
    }
  }
  return result;
}

}  // namespace icph
