#pragma once

// Central-difference gradient checks for anything exposing a scalar
// objective over a flat parameter vector.

#include <Eigen/Dense>
#include <functional>

namespace oracles {

inline Eigen::VectorXd central_difference(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
    double eps = 1e-5) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd t = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    t[i] = theta[i] + eps;
    const double up = f(t);
    t[i] = theta[i] - eps;
    const double down = f(t);
    t[i] = theta[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// relative error metric used by the gradient checks
inline double max_relative_error(const Eigen::VectorXd& analytic,
                                 const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(1.0, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace oracles
