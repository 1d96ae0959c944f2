#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace biphoton::lm {

using Residuals = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct Options {
  int max_iterations = 500;
  double relative_cost_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  double initial_damping = 1e-3;
  /// Relative central-difference step; h_j = step · max(1, |x_j|).
  double jacobian_step = 1e-6;
};

struct Result {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;  // at x
  double cost = 0.0;         // ½‖r‖²
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // cost after each accepted step, starting at x0
};

/// Central-difference Jacobian of `f` at `x`.
Eigen::MatrixXd numeric_jacobian(const Residuals& f, const Eigen::VectorXd& x, double relative_step = 1e-6);

/// Levenberg–Marquardt minimization of ½‖f(x)‖² with Marquardt scaling
/// (damping proportional to diag(JᵀJ)). A step is accepted only if it lowers
/// the cost, so cost_history is strictly decreasing.
Result minimize(const Residuals& f, Eigen::VectorXd x0, const Options& options = {});

}  // namespace biphoton::lm
