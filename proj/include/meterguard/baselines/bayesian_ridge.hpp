#pragma once

#include <optional>

#include <Eigen/Core>
#include <json.hpp>

namespace meterguard::baselines {

/// Evidence maximization over the noise precision alpha and the weight
/// precision lambda, with Gamma hyperpriors. An intercept is fitted by
/// centering and is not regularized.
struct BayesianRidgeConfig {
  int max_iter = 300;
  double tol = 1e-6;  // relative change of both precisions
  double alpha_1 = 1e-6, alpha_2 = 1e-6;
  double lambda_1 = 1e-6, lambda_2 = 1e-6;
  std::optional<double> fixed_lambda;  // holds the weight precision fixed when set
};

struct BayesianRidge {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  double alpha = 0.0;   // noise precision
  double lambda = 0.0;  // weight precision
  int iterations = 0;
  bool converged = false;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  nlohmann::json diagnostics() const;
};

/// Throws std::invalid_argument for fewer than two samples.
BayesianRidge fit_bayesian_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const BayesianRidgeConfig& config = {});

}  // namespace meterguard::baselines
