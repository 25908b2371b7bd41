#include "meterguard/baselines/elastic_net.hpp"

#include <cmath>
#include <stdexcept>

namespace meterguard::baselines {

Eigen::VectorXd ElasticNet::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != coef.size()) throw std::invalid_argument("elastic net: feature count mismatch");
  return (X * coef).array() + intercept;
}

nlohmann::json ElasticNet::diagnostics() const {
  return {{"l1", l1}, {"l2", l2}, {"sweeps", sweeps}, {"converged", converged},
          {"nonzero", static_cast<int>((coef.array() != 0.0).count())}};
}

namespace {

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

}  // namespace

ElasticNet fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ElasticNetConfig& config) {
  if (config.l1 < 0.0 || config.l2 < 0.0) throw std::invalid_argument("elastic net penalties must be >= 0");
  if (X.rows() == 0) throw std::invalid_argument("elastic net needs samples");
  if (X.rows() != y.size()) throw std::invalid_argument("elastic net: X and y differ in rows");
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm();

  ElasticNet m;
  m.l1 = config.l1;
  m.l2 = config.l2;
  m.coef = Eigen::VectorXd::Zero(X.cols());
  Eigen::VectorXd r = y.array() - y_mean;
  for (m.sweeps = 1; m.sweeps <= config.max_sweeps; ++m.sweeps) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < Xc.cols(); ++j) {
      const double denom = col_sq(j) + 2.0 * config.l2;
      if (denom <= 0.0) continue;  // constant column with no ridge term stays at zero
      const double old = m.coef(j);
      const double rho = Xc.col(j).dot(r) + col_sq(j) * old;
      const double next = soft_threshold(rho, config.l1) / denom;
      if (next != old) {
        r.noalias() -= (next - old) * Xc.col(j);
        m.coef(j) = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    if (max_change < config.tol) {
      m.converged = true;
      break;
    }
  }
  m.sweeps = std::min(m.sweeps, config.max_sweeps);
  m.intercept = y_mean - x_mean.dot(m.coef);
  return m;
}

double kkt_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ElasticNet& model) {
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd r = (y.array() - y.mean()).matrix() - Xc * model.coef;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < Xc.cols(); ++j) {
    const double g = Xc.col(j).dot(r) - 2.0 * model.l2 * model.coef(j);
    const double b = model.coef(j);
    const double v = b != 0.0 ? std::abs(g - model.l1 * (b > 0 ? 1.0 : -1.0))
                              : std::max(0.0, std::abs(g) - model.l1);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace meterguard::baselines
