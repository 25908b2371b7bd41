#include <doctest.h>

#include <cmath>
#include <random>

#include "meterguard/nn/checkpoint.hpp"
#include "meterguard/nn/grad_check.hpp"
#include "meterguard/nn/layers.hpp"
#include "meterguard/nn/loss.hpp"
#include "meterguard/nn/lstm.hpp"
#include "meterguard/nn/optimizer.hpp"
#include "support/differentiable.hpp"

using namespace meterguard;
using namespace meterguard::nn;
using meterguard::testing::random_tensor;
using meterguard::testing::SequentialMse;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Scalar-by-scalar LSTM step with gate blocks [f, i, o, g].
void loop_step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c, const LstmParams& p) {
  const std::size_t H = p.hidden_dim(), D = p.input_dim();
  std::vector<double> nh(H), nc(H);
  for (std::size_t u = 0; u < H; ++u) {
    double a[4];
    for (int g = 0; g < 4; ++g) {
      const std::size_t col = static_cast<std::size_t>(g) * H + u;
      double s = p.b(static_cast<Eigen::Index>(col));
      for (std::size_t k = 0; k < D; ++k) s += x[k] * p.U(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(col));
      for (std::size_t k = 0; k < H; ++k) s += h[k] * p.W(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(col));
      a[g] = s;
    }
    const double f = sig(a[0]), i = sig(a[1]), o = sig(a[2]), g = std::tanh(a[3]);
    nc[u] = f * c[u] + i * g;
    nh[u] = o * std::tanh(nc[u]);
  }
  h = nh;
  c = nc;
}

LstmParams random_params(std::size_t D, std::size_t H, std::mt19937_64& rng) {
  LstmParams p(D, H);
  std::normal_distribution<double> n(0.0, 0.5);
  for (Eigen::Index i = 0; i < p.U.size(); ++i) p.U.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b(i) = n(rng);
  return p;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("lstm cell closed forms") {
    LstmParams p(2, 3);
    p.U.setZero();
    p.W.setZero();
    p.b.setZero();
    LstmGates g;
    auto s = lstm_cell_step(Eigen::RowVectorXd::Zero(2), LstmState::zeros(3), p, CellVariant::standard, &g);
    CHECK(g.forget(0) == 0.5);
    CHECK(g.input(1) == 0.5);
    CHECK(g.output(2) == 0.5);
    CHECK(g.candidate(0) == 0.0);
    CHECK(s.c.norm() == 0.0);
    CHECK(s.h.norm() == 0.0);

    p.b_gate(Gate::candidate).setConstant(50.0);
    s = lstm_cell_step(Eigen::RowVectorXd::Zero(2), LstmState::zeros(3), p);
    CHECK(s.c(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.h(0) == doctest::Approx(std::tanh(0.5) * 0.5).epsilon(1e-12));
    CHECK(s.h(0) == doctest::Approx(0.2311).epsilon(1e-3));
  }

  TEST_CASE("saturated forget and closed input gates carry the cell") {
    std::mt19937_64 rng(3);
    LstmParams p = random_params(2, 4, rng);
    p.U.setZero();
    p.W.setZero();
    p.b_gate(Gate::forget).setConstant(40.0);
    p.b_gate(Gate::input).setConstant(-40.0);
    LstmState prev{Eigen::RowVectorXd::Random(4), Eigen::RowVectorXd::Random(4)};
    const auto s = lstm_cell_step(Eigen::RowVectorXd::Random(2), prev, p);
    CHECK((s.c - prev.c).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("lstm cell matches a loop-based oracle and gate ranges hold") {
    std::mt19937_64 rng(11);
    const LstmParams p = random_params(5, 3, rng);
    std::vector<double> h(3, 0.0), c(3, 0.0);
    LstmState s = LstmState::zeros(3);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int t = 0; t < 6; ++t) {
      std::vector<double> x(5);
      for (auto& v : x) v = n(rng);
      LstmGates g;
      s = lstm_cell_step(Eigen::Map<Eigen::RowVectorXd>(x.data(), 5), s, p, CellVariant::standard, &g);
      loop_step(x, h, c, p);
      for (int u = 0; u < 3; ++u) {
        CHECK(s.h(u) == doctest::Approx(h[static_cast<std::size_t>(u)]).epsilon(1e-12));
        CHECK(s.c(u) == doctest::Approx(c[static_cast<std::size_t>(u)]).epsilon(1e-12));
        for (double v : {g.forget(u), g.input(u), g.output(u)}) CHECK((v > 0.0 && v < 1.0));
        CHECK(std::abs(g.candidate(u)) < 1.0);
      }
    }
  }

  TEST_CASE("batched lstm layer equals repeated cell steps") {
    std::mt19937_64 rng(4);
    Lstm layer(3, 4, true);
    layer.initialize(rng);
    const auto p = layer.export_params();
    const Tensor x = random_tensor({2, 5, 3}, rng);
    const Tensor y = layer.forward(x);
    for (std::size_t b = 0; b < 2; ++b) {
      LstmState s = LstmState::zeros(4);
      for (std::size_t t = 0; t < 5; ++t) {
        Eigen::RowVectorXd xt(3);
        for (int k = 0; k < 3; ++k) xt(k) = x[(b * 5 + t) * 3 + static_cast<std::size_t>(k)];
        s = lstm_cell_step(xt, s, p);
        for (int u = 0; u < 4; ++u) CHECK(y[(b * 5 + t) * 4 + static_cast<std::size_t>(u)] == doctest::Approx(s.h(u)).epsilon(1e-12));
      }
    }
    CHECK(layer.describe().dump() == Lstm(3, 4, true).describe().dump());
    CHECK(p.b_gate(Gate::forget).minCoeff() == 1.0);
  }

  TEST_CASE("conv and pooling examples") {
    Conv1d conv(1, 1, 3);
    conv.kernel().value = Tensor({3, 1, 1}, {0.0, 1.0, 0.0});
    conv.bias().value.fill(0.0);
    const Tensor x({1, 5, 1}, {1, -2, 3, 4, 5});
    CHECK(conv.forward(x) == x);

    MaxPool1d pool(2);
    CHECK(pool.forward(Tensor({1, 4, 1}, {1, 3, 2, 5})).storage() == Storage{3, 5});

    Conv2d c2(1, 1, 3, 1, Padding::valid);
    c2.kernel().value.fill(1.0);
    c2.bias().value.fill(0.0);
    const Tensor y = c2.forward(Tensor({1, 5, 5, 1}, 1.0));
    CHECK(y.shape() == Shape{1, 3, 3, 1});
    for (double v : y.values()) CHECK(v == 9.0);
  }

  TEST_CASE("dense gradient equals the closed form") {
    Sequential net;
    auto& d = net.emplace<Dense>(3, 1);
    std::mt19937_64 rng(2);
    net.initialize(rng);
    const Tensor x({1, 3}, {0.5, -1.0, 2.0});
    SequentialMse f(net, x, {0.7});
    f.loss_and_grad();
    const double yhat = net.forward(x)[0];
    for (std::size_t k = 0; k < 3; ++k) CHECK(d.weight().grad[k] == doctest::Approx(2.0 * (yhat - 0.7) * x[k]).epsilon(1e-12));
    CHECK(d.bias().grad[0] == doctest::Approx(2.0 * (yhat - 0.7)).epsilon(1e-12));

    const auto zero = mse_loss(Tensor({1}, {3.0}), std::vector<double>{3.0});
    CHECK(zero.value == 0.0);
    CHECK(zero.grad[0] == 0.0);
  }

  TEST_CASE("finite differences: linear model and two-step lstm") {
    std::mt19937_64 rng(8);
    Sequential lin;
    lin.emplace<Dense>(4, 1);
    lin.initialize(rng);
    SequentialMse a(lin, random_tensor({6, 4}, rng), {1, 2, 3, 4, 5, 6});
    CHECK(grad_check(a).max_relative_error < 1e-8);

    Sequential rnn;
    rnn.emplace<Lstm>(3, 4, false);
    rnn.emplace<Dense>(4, 1);
    rnn.initialize(rng);
    SequentialMse b(rnn, random_tensor({2, 2, 3}, rng), {0.3, -0.4});
    const auto r = grad_check(b);
    CHECK(r.passed());
    CHECK(r.max_relative_error < 1e-4);

    Sequential sigmoid_cell;
    sigmoid_cell.emplace<Lstm>(3, 4, true, CellVariant::sigmoid_memory);
    sigmoid_cell.emplace<Lstm>(4, 2, false, CellVariant::sigmoid_memory);
    sigmoid_cell.emplace<Dense>(2, 1);
    sigmoid_cell.initialize(rng);
    SequentialMse c(sigmoid_cell, random_tensor({2, 3, 3}, rng), {0.1, 0.9});
    CHECK(grad_check(c).passed());
  }

  TEST_CASE("finite differences: conv stacks") {
    std::mt19937_64 rng(21);
    Sequential net1;
    net1.emplace<Conv1d>(2, 3, 3);
    net1.emplace<Tanh>();
    net1.emplace<MaxPool1d>(2);
    net1.emplace<Conv1d>(3, 2, 3, 1, Padding::valid);
    net1.emplace<Relu>();
    net1.emplace<Flatten>();
    net1.emplace<Dense>(4, 1);
    net1.emplace<Sigmoid>();
    net1.initialize(rng);
    SequentialMse a(net1, random_tensor({3, 8, 2}, rng), {0.2, 0.5, 0.8});
    const auto ra = grad_check(a);
    CHECK(ra.passed());
    CHECK(ra.checked > 0);

    Sequential net2;
    net2.emplace<Conv2d>(1, 2, 3);
    net2.emplace<Relu>();
    net2.emplace<MaxPool2d>(2);
    net2.emplace<Conv2d>(2, 2, 3, 2, Padding::same);
    net2.emplace<Flatten>();
    net2.emplace<Dense>(8, 1);
    net2.initialize(rng);
    SequentialMse b(net2, random_tensor({2, 8, 8, 1}, rng), {1.0, -1.0});
    CHECK(grad_check(b).passed());
  }

  TEST_CASE("optimizer steps") {
    Parameter p("w", {1});
    p.grad[0] = 1.0;
    OptimizerConfig sgd;
    sgd.kind = OptimizerKind::sgd;
    sgd.learning_rate = 0.1;
    Optimizer o(sgd);
    std::vector<Parameter*> ps{&p};
    o.step(ps);
    CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-15));

    Parameter q("q", {2});
    q.value[0] = 0.3;
    std::vector<Parameter*> qs{&q};
    Optimizer adam(OptimizerConfig{});
    adam.step(qs);
    CHECK(q.value[0] == 0.3);
    CHECK(q.value[1] == 0.0);

    q.grad[0] = NAN;
    CHECK_THROWS_WITH_AS(adam.step(qs), doctest::Contains("q"), std::runtime_error);

    OptimizerConfig clip;
    clip.kind = OptimizerKind::sgd;
    clip.learning_rate = 1.0;
    clip.clip_norm = 1.0;
    Parameter r("r", {2});
    r.grad[0] = 3.0;
    r.grad[1] = 4.0;
    std::vector<Parameter*> rs{&r};
    Optimizer(clip).step(rs);
    CHECK(r.value[0] == doctest::Approx(-0.6));
    CHECK(r.value[1] == doctest::Approx(-0.8));
  }

  TEST_CASE("training trajectories are reproducible") {
    auto run = [] {
      std::mt19937_64 rng(5);
      Sequential net;
      net.emplace<Lstm>(2, 3, false);
      net.emplace<Dense>(3, 1);
      net.initialize(rng);
      const Tensor x = random_tensor({4, 3, 2}, rng);
      Optimizer opt(OptimizerConfig{});
      for (int k = 0; k < 10; ++k) {
        const auto params = net.parameters();
        zero_grads(params);
        const auto l = mse_loss(net.forward(x), std::vector<double>{1, 0, 1, 0});
        net.backward(l.grad);
        opt.step(params);
      }
      std::vector<Tensor> out;
      for (auto* p : net.parameters()) out.push_back(p->value);
      return out;
    };
    CHECK(run() == run());
  }

  TEST_CASE("checkpoints round trip and reject other architectures") {
    std::mt19937_64 rng(6);
    Sequential net;
    net.emplace<Lstm>(2, 3, false);
    net.emplace<Dense>(3, 1);
    net.initialize(rng);
    const auto params = net.parameters();
    const auto ckpt = make_checkpoint(net.describe(), params, 6, {{"note", "x"}});

    Sequential copy;
    copy.emplace<Lstm>(2, 3, false);
    copy.emplace<Dense>(3, 1);
    load_checkpoint(ckpt, copy.describe(), copy.parameters());
    const Tensor x = random_tensor({2, 4, 2}, rng);
    CHECK(copy.forward(x) == net.forward(x));

    Sequential other;
    other.emplace<Lstm>(2, 4, false);
    other.emplace<Dense>(4, 1);
    CHECK_THROWS_AS(load_checkpoint(ckpt, other.describe(), other.parameters()), CheckpointError);
    auto broken = ckpt;
    broken["parameters"].erase(0);
    CHECK_THROWS_AS(load_checkpoint(broken, copy.describe(), copy.parameters()), CheckpointError);
  }
}
