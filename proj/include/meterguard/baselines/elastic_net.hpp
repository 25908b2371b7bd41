#pragma once

#include <Eigen/Core>
#include <json.hpp>

namespace meterguard::baselines {

/// Minimizes 1/2 ||y - b - X beta||^2 + l1 ||beta||_1 + l2 ||beta||^2 by cyclic
/// coordinate descent; the intercept b is handled by centering.
struct ElasticNetConfig {
  double l1 = 1.0;
  double l2 = 1.0;
  double tol = 1e-8;  // max absolute coefficient change per sweep
  int max_sweeps = 100000;
};

struct ElasticNet {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  double l1 = 0.0, l2 = 0.0;
  int sweeps = 0;
  bool converged = false;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  nlohmann::json diagnostics() const;
};

/// Throws std::invalid_argument for negative penalties or empty input.
ElasticNet fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ElasticNetConfig& config = {});

/// Largest violation of the subgradient optimality conditions on centered data:
/// |g_j - l1 sign(beta_j)| for active j, max(0, |g_j| - l1) otherwise, where
/// g_j = x_j^T r - 2 l2 beta_j.
double kkt_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ElasticNet& model);

}  // namespace meterguard::baselines
