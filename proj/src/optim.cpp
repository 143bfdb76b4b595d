#include "macrocast/optim.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace macrocast {

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else {
      const double f0 = f(x);
      g[i] = std::isfinite(fp) ? (fp - f0) / h : std::isfinite(fm) ? (f0 - fm) / h : 0.0;
    }
  }
  return g;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opt) {
  const auto n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  if (n == 0 || !std::isfinite(res.value)) {
    res.converged = n == 0 && std::isfinite(res.value);
    return res;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = numerical_gradient(f, res.x, opt.difference_step);
  int small_steps = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    const double max_move = dir.lpNorm<Eigen::Infinity>();
    if (max_move > 2.0) step = 2.0 / max_move;
    double f_new = 0.0;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-3;
      break;
    }
    Eigen::VectorXd g_new = numerical_gradient(f, x_new, opt.difference_step);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double rel = std::abs(res.value - f_new) / (std::abs(res.value) + 1e-10);
    res.x = std::move(x_new);
    res.value = f_new;
    g = std::move(g_new);
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd Hy = H * y;
      const double rho = 1.0 / sy;
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    small_steps = rel < opt.relative_tolerance ? small_steps + 1 : 0;
    if (small_steps >= 2) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace macrocast
