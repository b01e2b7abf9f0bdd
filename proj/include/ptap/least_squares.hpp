#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ptap {

/// Residual callback: fills r (size m) for parameters p (size n).
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LeastSquaresOptions {
  int max_iterations = 500;
  double relative_step_tolerance = 1e-8;
  double gradient_tolerance = 1e-14;
};

struct LeastSquaresResult {
  Eigen::VectorXd params;
  double initial_cost = 0.0;  // 0.5 * |r|^2
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool finite = true;
};

namespace detail {

inline void numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& p, const Eigen::VectorXd& r0,
                             Eigen::MatrixXd& jac) {
  const Eigen::Index n = p.size();
  Eigen::VectorXd rp(r0.size()), rm(r0.size());
  Eigen::VectorXd q = p;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(std::abs(p[j]), 1e-3);
    q[j] = p[j] + h;
    f(q, rp);
    q[j] = p[j] - h;
    f(q, rm);
    q[j] = p[j];
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
}

}  // namespace detail

/// Levenberg-Marquardt with central-difference Jacobians and Nielsen's
/// damping update. Stops when the relative parameter step falls below the
/// tolerance, the gradient vanishes, or the iteration budget runs out.
inline LeastSquaresResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd p, Eigen::Index residuals,
                                              const LeastSquaresOptions& opt = {}) {
  LeastSquaresResult out;
  Eigen::VectorXd r(residuals), r_new(residuals);
  f(p, r);
  if (!r.allFinite()) {
    out.params = p;
    out.finite = false;
    return out;
  }
  double cost = 0.5 * r.squaredNorm();
  out.initial_cost = cost;
  Eigen::MatrixXd jac(residuals, p.size());
  double damping = -1.0;
  double nu = 2.0;
  const Eigen::Index n = p.size();

  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it + 1;
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    detail::numeric_jacobian(f, p, r, jac);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance * std::max(1.0, cost)) {
      out.converged = true;
      break;
    }
    if (damping < 0.0) damping = 1e-3 * jtj.diagonal().maxCoeff();

    bool accepted = false;
    bool small_step = false;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index i = 0; i < n; ++i) a(i, i) += damping * std::max(jtj(i, i), 1e-12);
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      if (!step.allFinite()) {
        damping *= nu;
        nu *= 2.0;
        continue;
      }
      small_step = step.norm() <= opt.relative_step_tolerance * (p.norm() + opt.relative_step_tolerance);
      const Eigen::VectorXd trial = p + step;
      f(trial, r_new);
      const double new_cost = r_new.allFinite() ? 0.5 * r_new.squaredNorm() : HUGE_VAL;
      const double predicted = -(step.dot(grad) + 0.5 * step.dot(jtj * step));
      if (new_cost < cost || (new_cost == cost && small_step)) {
        const double rho = predicted > 0.0 ? (cost - new_cost) / predicted : 1.0;
        damping *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        p = trial;
        r = r_new;
        cost = new_cost;
        accepted = true;
      } else {
        damping *= nu;
        nu *= 2.0;
      }
      if (small_step) break;
    }
    if (small_step || !accepted) {
      out.converged = small_step || cost == 0.0;
      break;
    }
  }
  out.params = p;
  out.final_cost = cost;
  out.finite = p.allFinite() && std::isfinite(cost);
  return out;
}

}  // namespace ptap
