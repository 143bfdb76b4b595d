#pragma once

#include <Eigen/Core>
#include <functional>

namespace macrocast {

struct BfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double relative_tolerance = 1e-10;
  double difference_step = 1e-5;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central-difference gradient.
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step);

/// Quasi-Newton minimisation with numerical gradients and a backtracking
/// Armijo line search. Non-finite objective values are treated as infeasible.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

}  // namespace macrocast
