#include "meterguard/baselines/gbr.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace meterguard::baselines {

double RegressionTree::predict(const double* row, Eigen::Index stride) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(k)];
    k = row[n.feature * stride] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, int min_leaf) : X_(X), min_leaf_(min_leaf) {
    const auto n = static_cast<std::size_t>(X.rows());
    order_.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      auto& o = order_[static_cast<std::size_t>(j)];
      o.resize(n);
      std::iota(o.begin(), o.end(), 0);
      std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
        return X(static_cast<Eigen::Index>(a), j) < X(static_cast<Eigen::Index>(b), j);
      });
    }
  }

  RegressionTree build(const Eigen::VectorXd& target, int max_depth) {
    t_ = &target;
    tree_ = {};
    const auto n = static_cast<std::size_t>(X_.rows());
    node_of_.assign(n, 0);
    tree_.nodes.assign(1, {});
    std::vector<int> frontier{0};
    for (int depth = 0; depth <= max_depth; ++depth) {
      // Per-node sums over the current frontier.
      std::vector<double> sum(tree_.nodes.size(), 0.0);
      std::vector<std::size_t> cnt(tree_.nodes.size(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        sum[static_cast<std::size_t>(node_of_[i])] += (*t_)(static_cast<Eigen::Index>(i));
        ++cnt[static_cast<std::size_t>(node_of_[i])];
      }
      for (int k : frontier) {
        const auto ku = static_cast<std::size_t>(k);
        tree_.nodes[ku].value = cnt[ku] ? sum[ku] / static_cast<double>(cnt[ku]) : 0.0;
      }
      if (depth == max_depth) break;
      const auto splits = best_splits(frontier, sum, cnt);
      std::vector<int> next;
      for (std::size_t f = 0; f < frontier.size(); ++f) {
        const Split& s = splits[f];
        if (s.feature < 0) continue;
        const int k = frontier[f];
        const int left = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        tree_.nodes.push_back({});
        auto& node = tree_.nodes[static_cast<std::size_t>(k)];
        node.feature = s.feature;
        node.threshold = s.threshold;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree_.nodes[static_cast<std::size_t>(node_of_[i])];
        if (node.feature < 0) continue;
        node_of_[i] = X_(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
      }
      if (next.empty()) break;
      frontier = std::move(next);
    }
    return std::move(tree_);
  }

 private:
  std::vector<Split> best_splits(const std::vector<int>& frontier, const std::vector<double>& sum,
                                 const std::vector<std::size_t>& cnt) {
    const std::size_t slots = tree_.nodes.size();
    std::vector<int> slot_of(slots, -1);
    for (std::size_t f = 0; f < frontier.size(); ++f) slot_of[static_cast<std::size_t>(frontier[f])] = static_cast<int>(f);
    std::vector<Split> best(frontier.size());
    std::vector<double> left_sum(frontier.size());
    std::vector<std::size_t> left_cnt(frontier.size());
    std::vector<double> last_x(frontier.size());
    for (Eigen::Index j = 0; j < X_.cols(); ++j) {
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_cnt.begin(), left_cnt.end(), 0);
      for (std::size_t i : order_[static_cast<std::size_t>(j)]) {
        const int slot = slot_of[static_cast<std::size_t>(node_of_[i])];
        if (slot < 0) continue;
        const auto su = static_cast<std::size_t>(slot);
        const auto ku = static_cast<std::size_t>(frontier[su]);
        const double x = X_(static_cast<Eigen::Index>(i), j);
        // Candidate split between the previous value and this one.
        if (left_cnt[su] >= static_cast<std::size_t>(min_leaf_) && x > last_x[su] &&
            cnt[ku] - left_cnt[su] >= static_cast<std::size_t>(min_leaf_)) {
          const double nl = static_cast<double>(left_cnt[su]);
          const double nr = static_cast<double>(cnt[ku] - left_cnt[su]);
          const double sl = left_sum[su], sr = sum[ku] - left_sum[su];
          const double gain = sl * sl / nl + sr * sr / nr - sum[ku] * sum[ku] / static_cast<double>(cnt[ku]);
          if (gain > best[su].gain + 1e-12) best[su] = {static_cast<int>(j), 0.5 * (last_x[su] + x), gain};
        }
        left_sum[su] += (*t_)(static_cast<Eigen::Index>(i));
        ++left_cnt[su];
        last_x[su] = x;
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd* t_ = nullptr;
  int min_leaf_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<int> node_of_;
  RegressionTree tree_;
};

double tree_predict_row(const RegressionTree& t, const Eigen::MatrixXd& X, Eigen::Index i) {
  return t.predict(X.data() + i, X.rows());  // column-major: stride between features is rows()
}

}  // namespace

RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& target, int max_depth,
                                   int min_samples_leaf) {
  if (X.rows() != target.size()) throw std::invalid_argument("tree: X and target differ in rows");
  if (X.rows() == 0) throw std::invalid_argument("tree: no samples");
  TreeBuilder b(X, std::max(1, min_samples_leaf));
  return b.build(target, std::max(0, max_depth));
}

Eigen::VectorXd Gbr::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), init);
  for (const auto& t : trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += learning_rate * tree_predict_row(t, X, i);
  }
  return out;
}

nlohmann::json Gbr::diagnostics() const {
  return {{"n_trees", trees.size()}, {"learning_rate", learning_rate}, {"train_mse", train_mse}};
}

Gbr fit_gbr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbrConfig& config) {
  if (X.rows() < 2) throw std::invalid_argument("gradient boosting needs at least two samples");
  if (X.rows() != y.size()) throw std::invalid_argument("gradient boosting: X and y differ in rows");
  if (config.n_trees < 0 || config.max_depth < 0 || config.learning_rate < 0.0) {
    throw std::invalid_argument("gradient boosting: invalid configuration");
  }
  Gbr m;
  m.init = y.mean();
  m.learning_rate = config.learning_rate;
  Eigen::VectorXd f = Eigen::VectorXd::Constant(y.size(), m.init);
  const double n = static_cast<double>(y.size());
  m.train_mse.push_back((y - f).squaredNorm() / n);
  TreeBuilder builder(X, std::max(1, config.min_samples_leaf));
  for (int stage = 0; stage < config.n_trees; ++stage) {
    const Eigen::VectorXd residual = y - f;
    m.trees.push_back(builder.build(residual, config.max_depth));
    for (Eigen::Index i = 0; i < X.rows(); ++i) f(i) += m.learning_rate * tree_predict_row(m.trees.back(), X, i);
    m.train_mse.push_back((y - f).squaredNorm() / n);
  }
  return m;
}

}  // namespace meterguard::baselines
