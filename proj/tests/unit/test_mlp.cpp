#include <doctest.h>

#include <cmath>

#include "oracles/finite_diff.hpp"
#include "ventrl/mlp.hpp"

using namespace ventrl;
using namespace ventrl::ml;

namespace {

MLPConfig tiny_config(std::vector<int> hidden, std::uint64_t seed = 1) {
  MLPConfig c;
  c.hidden_sizes = std::move(hidden);
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("zero learning rate leaves the model unchanged") {
  MLPConfig c = tiny_config({8});
  c.learning_rate = 0.0;
  MLPModel net(3, c);
  const Eigen::VectorXd before = net.parameters();

  Eigen::MatrixXd X(4, 3);
  X.setRandom();
  Eigen::VectorXd y(4);
  y.setRandom();
  net.fit_epoch(X, y, 2);
  CHECK((net.parameters() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("first adaptive-moment step moves the weight by about -lr") {
  // single linear weight, gradient arranged to be exactly 1
  MLPConfig c = tiny_config({});
  c.l2 = 0.0;
  c.learning_rate = 1e-3;
  MLPModel net(1, c);
  Eigen::VectorXd theta(2);
  theta << 0.0, 0.0;  // w = 0, b = 0
  net.set_parameters(theta);

  Eigen::MatrixXd X(1, 1);
  X(0, 0) = 1.0;
  Eigen::VectorXd y(1);
  y[0] = -0.5;  // err = 0.5, dL/dw = 2 * 0.5 * 1 = 1
  const auto [loss, grad] = net.loss_and_gradient(X, y);
  CHECK(grad[0] == doctest::Approx(1.0).epsilon(1e-12));

  net.fit_epoch(X, y, 1);
  const double dw = net.parameters()[0] - 0.0;
  CHECK(dw == doctest::Approx(-c.learning_rate).epsilon(1e-6));
}

TEST_CASE("fits y = 2x well within 200 epochs") {
  MLPConfig c = tiny_config({16, 16}, 3);
  c.learning_rate = 5e-3;
  c.l2 = 0.0;
  MLPModel net(1, c);

  Eigen::MatrixXd X(100, 1);
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) {
    X(i, 0) = -1.0 + 2.0 * i / 99.0;
    y[i] = 2.0 * X(i, 0);
  }
  const Eigen::VectorXd pred0 = net.predict_batch(X);
  const double initial_mse = (pred0 - y).squaredNorm() / 100.0;
  double mse = initial_mse;
  for (int e = 0; e < 200; ++e) mse = net.fit_epoch(X, y, 16);
  CHECK(mse < 1e-2 * initial_mse);
}

TEST_CASE("zero parameters give zero output") {
  MLPModel net(4, tiny_config({6, 5}));
  net.set_parameters(Eigen::VectorXd::Zero(net.parameters().size()));
  CHECK(net.predict(std::vector<double>{1.0, -2.0, 0.5, 3.0}) == 0.0);
}

TEST_CASE("output is linear in the final layer") {
  MLPModel net(3, tiny_config({7}, 11));
  const std::vector<double> x = {0.4, -1.2, 2.0};
  const double base = net.predict(x);
  net.mutable_weights().back() *= 2.0;
  net.mutable_biases().back() *= 2.0;
  CHECK(net.predict(x) == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("golden forward pass on hand-set 2-2-1 weights") {
  MLPModel net(2, tiny_config({2}));
  auto& w = net.mutable_weights();
  auto& b = net.mutable_biases();
  w[0](0, 0) = 1.0;
  w[0](0, 1) = -1.0;
  w[0](1, 0) = 0.5;
  w[0](1, 1) = 2.0;
  b[0] << 0.1, -0.2;
  w[1](0, 0) = 3.0;
  w[1](0, 1) = -1.0;
  b[1][0] = 0.25;

  // x = (1, 0.5): z1 = (1*1 - 1*0.5 + 0.1, 0.5*1 + 2*0.5 - 0.2) = (0.6, 1.3)
  // relu keeps both; out = 3*0.6 - 1*1.3 + 0.25 = 0.75
  CHECK(net.predict(std::vector<double>{1.0, 0.5}) == doctest::Approx(0.75).epsilon(1e-12));

  // negative pre-activation is clamped: x = (-1, 0): z1 = (-0.9, -0.7) -> relu 0
  CHECK(net.predict(std::vector<double>{-1.0, 0.0}) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int input = 1 + static_cast<int>(rng.uniform_index(4));
    std::vector<int> hidden;
    const int n_hidden = static_cast<int>(rng.uniform_index(3));
    for (int h = 0; h < n_hidden; ++h) {
      hidden.push_back(2 + static_cast<int>(rng.uniform_index(5)));
    }
    MLPConfig c = tiny_config(hidden, 100 + rep);
    c.l2 = rep % 2 == 0 ? 0.0 : 1e-3;
    MLPModel net(input, c);

    const int n = 5;
    Eigen::MatrixXd X(n, input);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < input; ++j) X(i, j) = rng.normal();
      y[i] = rng.normal();
    }

    const auto [loss, analytic] = net.loss_and_gradient(X, y);
    CHECK(std::isfinite(loss));
    const Eigen::VectorXd theta = net.parameters();
    MLPModel probe = net;
    const Eigen::VectorXd numeric = oracles::central_difference(
        [&](const Eigen::VectorXd& t) {
          probe.set_parameters(t);
          return probe.loss_and_gradient(X, y).first;
        },
        theta, 1e-5);
    CHECK(oracles::max_relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("normalization is applied to inputs") {
  MLPModel net(2, tiny_config({}));
  Eigen::VectorXd theta(3);
  theta << 1.0, 1.0, 0.0;  // y = x0 + x1
  net.set_parameters(theta);
  Eigen::VectorXd mean(2), sd(2);
  mean << 10.0, 20.0;
  sd << 2.0, 4.0;
  net.set_normalization(mean, sd);
  // normalized input = ((12-10)/2, (24-20)/4) = (1, 1) -> output 2
  CHECK(net.predict(std::vector<double>{12.0, 24.0}) == doctest::Approx(2.0));
}

TEST_CASE("sgd_step performs the plain gradient update") {
  MLPConfig c = tiny_config({});
  c.l2 = 0.0;
  MLPModel net(1, c);
  Eigen::VectorXd theta(2);
  theta << 0.0, 0.0;
  net.set_parameters(theta);
  // target 1 at x=0: only the bias moves, by alpha * 2 * (0 - 1) * (-1)
  net.sgd_step(std::vector<double>{0.0}, 1.0, 0.1);
  CHECK(net.parameters()[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(net.parameters()[0] == 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
  MLPModel net(3, tiny_config({4}));
  CHECK_THROWS_AS(net.predict(std::vector<double>{1.0, 2.0}), ValidationError);
  Eigen::MatrixXd X(2, 2);
  Eigen::VectorXd y(2);
  CHECK_THROWS_AS(net.fit_epoch(X, y, 1), ValidationError);
}
