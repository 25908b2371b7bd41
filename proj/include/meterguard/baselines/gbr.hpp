#pragma once

#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace meterguard::baselines {

struct GbrConfig {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 1;
};

/// Binary regression tree stored as flat nodes; leaves have feature == -1.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1, right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const double* row, Eigen::Index stride) const;
};

/// Least-squares tree on (X, target) with exhaustive split search.
RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& target, int max_depth,
                                   int min_samples_leaf = 1);

/// Squared-loss gradient boosting: F_0 = mean(y), F_m = F_{m-1} + lr * tree_m(residual).
struct Gbr {
  double init = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<double> train_mse;  // index 0 is the constant model, then one entry per stage

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  nlohmann::json diagnostics() const;
};

/// Throws std::invalid_argument for fewer than two samples or a bad config.
Gbr fit_gbr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbrConfig& config = {});

}  // namespace meterguard::baselines
