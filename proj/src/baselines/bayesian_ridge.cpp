#include "meterguard/baselines/bayesian_ridge.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SVD>

namespace meterguard::baselines {

Eigen::VectorXd BayesianRidge::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != coef.size()) throw std::invalid_argument("bayesian ridge: feature count mismatch");
  return (X * coef).array() + intercept;
}

nlohmann::json BayesianRidge::diagnostics() const {
  return {{"alpha", alpha}, {"lambda", lambda}, {"iterations", iterations}, {"converged", converged}};
}

BayesianRidge fit_bayesian_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const BayesianRidgeConfig& config) {
  if (X.rows() < 2) throw std::invalid_argument("bayesian ridge needs at least two samples");
  if (X.rows() != y.size()) throw std::invalid_argument("bayesian ridge: X and y differ in rows");
  const double n = static_cast<double>(X.rows());
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  const Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::VectorXd s2 = s.array().square();
  const Eigen::VectorXd uty = svd.matrixU().transpose() * yc;

  BayesianRidge m;
  const double var = yc.squaredNorm() / n;
  m.alpha = 1.0 / (var + std::numeric_limits<double>::epsilon());
  m.lambda = config.fixed_lambda.value_or(1.0);
  if (m.lambda <= 0.0) throw std::invalid_argument("bayesian ridge: weight precision must be > 0");

  auto solve = [&](double alpha, double lambda) {
    // coef = V diag(s / (s^2 + lambda / alpha)) U^T y
    const Eigen::VectorXd scale = s.array() / (s2.array() + lambda / alpha);
    return Eigen::VectorXd(svd.matrixV() * (scale.array() * uty.array()).matrix());
  };

  for (m.iterations = 1; m.iterations <= config.max_iter; ++m.iterations) {
    m.coef = solve(m.alpha, m.lambda);
    const double rss = (yc - Xc * m.coef).squaredNorm();
    const double gamma = (m.alpha * s2.array() / (m.lambda + m.alpha * s2.array())).sum();
    const double lambda_new = config.fixed_lambda
                                  ? m.lambda
                                  : (gamma + 2.0 * config.lambda_1) / (m.coef.squaredNorm() + 2.0 * config.lambda_2);
    const double alpha_new = (n - gamma + 2.0 * config.alpha_1) / (rss + 2.0 * config.alpha_2);
    const bool done = std::abs(alpha_new - m.alpha) <= config.tol * m.alpha &&
                      std::abs(lambda_new - m.lambda) <= config.tol * m.lambda;
    m.alpha = alpha_new;
    m.lambda = lambda_new;
    if (done) {
      m.converged = true;
      break;
    }
  }
  m.iterations = std::min(m.iterations, config.max_iter);
  m.coef = solve(m.alpha, m.lambda);
  m.intercept = y_mean - x_mean.dot(m.coef);
  return m;
}

}  // namespace meterguard::baselines
