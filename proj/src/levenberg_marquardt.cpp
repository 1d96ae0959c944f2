#include "biphoton/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "biphoton/error.hpp"

namespace biphoton::lm {

namespace {

double half_squared_norm(const Eigen::VectorXd& r) {
  const double c = 0.5 * r.squaredNorm();
  return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
}

constexpr double kMaxDamping = 1e16;

}  // namespace

Eigen::MatrixXd numeric_jacobian(const Residuals& f, const Eigen::VectorXd& x, double relative_step) {
  if (!(relative_step > 0.0)) throw Error("jacobian step must be > 0");
  Eigen::MatrixXd jac;
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = relative_step * std::max(1.0, std::abs(x[j]));
    probe[j] = x[j] + h;
    const Eigen::VectorXd up = f(probe);
    probe[j] = x[j] - h;
    const Eigen::VectorXd down = f(probe);
    probe[j] = x[j];
    if (j == 0) jac.resize(up.size(), x.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

Result minimize(const Residuals& f, Eigen::VectorXd x0, const Options& options) {
  Result result;
  result.x = std::move(x0);
  result.residuals = f(result.x);
  result.cost = half_squared_norm(result.residuals);
  if (!std::isfinite(result.cost)) throw Error("residuals are not finite at the starting point");
  result.cost_history.push_back(result.cost);

  double damping = options.initial_damping;
  while (result.iterations < options.max_iterations) {
    ++result.iterations;
    if (result.cost == 0.0) {
      result.converged = true;
      break;
    }
    const Eigen::MatrixXd jac = numeric_jacobian(f, result.x, options.jacobian_step);
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * result.residuals;
    Eigen::VectorXd scale = normal.diagonal();
    const double floor = std::max(scale.maxCoeff() * 1e-14, std::numeric_limits<double>::min());
    scale = scale.cwiseMax(floor);

    bool accepted = false;
    bool stop = false;
    while (!accepted) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += damping * scale;
      const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      const Eigen::VectorXd trial = result.x + step;
      const Eigen::VectorXd r = f(trial);
      const double cost = step.allFinite() ? half_squared_norm(r) : std::numeric_limits<double>::infinity();
      if (cost < result.cost) {
        const double decrease = result.cost - cost;
        const bool small_change = decrease <= options.relative_cost_tolerance * result.cost;
        const bool small_step = step.norm() <= options.step_tolerance * (1.0 + result.x.norm());
        result.x = trial;
        result.residuals = r;
        result.cost = cost;
        result.cost_history.push_back(cost);
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        stop = small_change || small_step;
      } else {
        damping *= 4.0;
        // No descent left at any damping: a stationary point to working precision.
        if (damping > kMaxDamping || step.norm() <= options.step_tolerance * (1.0 + result.x.norm())) {
          stop = true;
          break;
        }
      }
    }
    if (stop) {
      result.converged = true;
      break;
    }
  }
  result.jacobian = numeric_jacobian(f, result.x, options.jacobian_step);
  return result;
}

}  // namespace biphoton::lm
