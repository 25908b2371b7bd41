#include <doctest.h>

#include <random>

#include "meterguard/baselines/bayesian_ridge.hpp"
#include "meterguard/baselines/elastic_net.hpp"
#include "meterguard/baselines/flat_samples.hpp"
#include "meterguard/baselines/gbr.hpp"
#include "meterguard/baselines/target_rate.hpp"
#include "meterguard/simgen.hpp"

using namespace meterguard;
using namespace meterguard::baselines;

namespace {
Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd X(r, c);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
  return X;
}
}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("bayesian ridge limits") {
    std::mt19937_64 rng(1);
    const auto X = random_matrix(60, 4, rng);
    Eigen::VectorXd beta(4);
    beta << 1.5, -2.0, 0.25, 3.0;
    const Eigen::VectorXd y = (X * beta).array() + 0.7;
    const auto m = fit_bayesian_ridge(X, y);
    CHECK((m.coef - beta).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(std::abs(m.intercept - 0.7) < 1e-4);

    const auto c = fit_bayesian_ridge(X, Eigen::VectorXd::Constant(60, 4.0));
    CHECK(c.coef.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(c.intercept == doctest::Approx(4.0));

    BayesianRidgeConfig huge;
    huge.fixed_lambda = 1e12;
    const auto h = fit_bayesian_ridge(X, y, huge);
    CHECK(h.coef.cwiseAbs().maxCoeff() < 1e-6);
    CHECK_THROWS_AS(fit_bayesian_ridge(X.topRows(1), y.head(1)), std::invalid_argument);
  }

  TEST_CASE("elastic net limits and optimality") {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    Eigen::VectorXd y(3);
    y << 2, 4, 6;
    ElasticNetConfig ols;
    ols.l1 = 0.0;
    ols.l2 = 0.0;
    const auto m = fit_elastic_net(X, y, ols);
    CHECK(std::abs(m.coef(0) - 2.0) < 1e-6);
    CHECK(std::abs(m.intercept) < 1e-6);

    ElasticNetConfig big;
    big.l1 = 1e9;
    CHECK(fit_elastic_net(X, y, big).coef(0) == 0.0);

    std::mt19937_64 rng(2);
    const auto R = random_matrix(20, 5, rng);
    const Eigen::VectorXd ry = R.col(0) * 2.0 - R.col(3) + random_matrix(20, 1, rng) * 0.1;
    for (double l1 : {0.0, 0.5, 3.0}) {
      ElasticNetConfig c;
      c.l1 = l1;
      c.l2 = 0.3;
      const auto fit = fit_elastic_net(R, ry, c);
      CHECK(fit.converged);
      CHECK(kkt_residual(R, ry, fit) < 1e-6);
    }
    ElasticNetConfig bad;
    bad.l1 = -1.0;
    CHECK_THROWS_AS(fit_elastic_net(X, y, bad), std::invalid_argument);
  }

  TEST_CASE("gradient boosting hand trace") {
    Eigen::MatrixXd X(2, 1);
    X << 0.0, 1.0;
    Eigen::VectorXd y(2);
    y << 1.0, 3.0;
    GbrConfig c;
    c.n_trees = 1;
    c.max_depth = 1;
    c.learning_rate = 0.5;
    const auto g = fit_gbr(X, y, c);
    const auto p = g.predict(X);
    CHECK(p(0) == doctest::Approx(2.0 + 0.5 * -1.0));
    CHECK(p(1) == doctest::Approx(2.0 + 0.5 * 1.0));
    REQUIRE(g.trees.front().nodes.size() == 3);

    std::mt19937_64 rng(3);
    const auto R = random_matrix(50, 3, rng);
    const Eigen::VectorXd ry = R.col(0).array().square() + R.col(1).array();
    c.n_trees = 30;
    c.max_depth = 3;
    c.learning_rate = 0.0;
    const auto flat = fit_gbr(R, ry, c).predict(R);
    for (Eigen::Index i = 0; i < flat.size(); ++i) CHECK(flat(i) == doctest::Approx(ry.mean()).epsilon(1e-12));

    c.learning_rate = 0.2;
    const auto fit = fit_gbr(R, ry, c);
    for (std::size_t k = 1; k < fit.train_mse.size(); ++k) CHECK(fit.train_mse[k] <= fit.train_mse[k - 1] + 1e-12);
    CHECK(fit.predict(R).allFinite());
  }

  TEST_CASE("target rate examples and antitonicity") {
    const std::vector<double> obs{1.0, 2.0, 3.0, 4.0};
    std::vector<NamedPredictions> models{{"same", obs}, {"off", {1.5, 1.0, 3.2, 6.0}}};
    const std::vector<double> thr{1e-9, 0.5, 1.0, 4.0};
    const auto rows = compare_on_detection(models, obs, thr);
    REQUIRE(rows.size() == 8);
    for (const auto& r : rows) {
      if (r.model == "same") CHECK(r.target_rate_pct == 0.0);
      CHECK(r.days_total == 4);
    }
    CHECK(rows[1].target_rate_pct == 100.0);
    double prev = 101.0;
    for (const auto& r : rows)
      if (r.model == "off") {
        CHECK(r.target_rate_pct <= prev);
        prev = r.target_rate_pct;
      }
    std::vector<NamedPredictions> bad{{"x", {1.0}}};
    CHECK_THROWS_AS(compare_on_detection(bad, obs, thr), std::invalid_argument);
    CHECK(target_rate_csv(rows).rfind("threshold,model,days_outside,target_rate_pct\n", 0) == 0);
  }

  TEST_CASE("flattened design matches window layout") {
    AreaConfig a;
    a.n_days = 30;
    a.n_submeters = 3;
    const auto d = generate_area(a);
    const auto f = build_features(d);
    const auto w = make_windows(f, residual_series(d).values, 5);
    const auto scaler = FeatureScaler::fit(f);
    const auto flat = flatten_windows(f, w, scaler);
    CHECK(flat.X.rows() == 25);
    CHECK(flat.X.cols() == 5 * 26);
    const auto e = scaler.encode(f[3]);
    for (std::size_t k = 0; k < 26; ++k) CHECK(flat.X(1, static_cast<Eigen::Index>(2 * 26 + k)) == e[k]);
    CHECK(flat.y(0) == doctest::Approx(scaler.error.apply(w[0].target)));
  }
}
