#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "icupred/nn.hpp"

using namespace icupred;

namespace {

MlpArchitecture arch_of(std::vector<Index> widths) {
  MlpArchitecture arch;
  arch.layer_widths = std::move(widths);
  return arch;
}

// Straight-line reference evaluator: plain loops over std::vector, written
// independently of the Eigen path.
double straight_line_forward(const MlpModel& model,
                             const std::vector<double>& x) {
  std::vector<double> current = x;
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto out_width = static_cast<std::size_t>(model.weights[l].rows());
    const auto in_width = static_cast<std::size_t>(model.weights[l].cols());
    std::vector<double> next(out_width, 0.0);
    for (std::size_t r = 0; r < out_width; ++r) {
      double z = model.biases[l][static_cast<Index>(r)];
      for (std::size_t c = 0; c < in_width; ++c) {
        z += model.weights[l](static_cast<Index>(r), static_cast<Index>(c)) *
             current[c];
      }
      if (l + 1 < layers) {
        next[r] = z > 0.0 ? z : 0.0;
      } else {
        next[r] = 1.0 / (1.0 + std::exp(-z));
      }
    }
    current = std::move(next);
  }
  return current[0];
}

long stored_scalars(const MlpModel& model) {
  long n = 0;
  for (const auto& w : model.weights) n += w.size();
  for (const auto& b : model.biases) n += b.size();
  return n;
}

// Objective used by the finite-difference oracle; evaluated through the
// public forward path only.
double objective(const MlpModel& model, const Matrix& X, const Vector& y,
                 double l2) {
  const Vector p = forward_batch(model, X);
  double loss = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    loss += bce_loss(p[i], y[i] >= 0.5 ? 1 : 0);
  }
  loss /= static_cast<double>(p.size());
  if (l2 > 0.0) {
    double norm = 0.0;
    for (const auto& w : model.weights) norm += w.squaredNorm();
    loss += 0.5 * l2 * norm;
  }
  return loss;
}

double min_preactivation_magnitude(const MlpModel& model, const Matrix& X) {
  double min_abs = std::numeric_limits<double>::infinity();
  Matrix a = X;
  for (std::size_t l = 0; l + 1 < model.weights.size(); ++l) {
    Matrix z = a * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    min_abs = std::min(min_abs, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return min_abs;
}

struct FdCheck {
  double max_rel_err = 0.0;
  double max_abs_err_small = 0.0;  // where |analytic| < 1e-4
};

FdCheck finite_difference_check(MlpModel model, const Matrix& X,
                                const Vector& y, double l2) {
  const double h = 1e-5;
  const Gradients analytic = backward(model, X, y, l2);
  FdCheck check;

  auto probe = [&](double& theta, double g_an) {
    const double saved = theta;
    theta = saved + h;
    const double up = objective(model, X, y, l2);
    theta = saved - h;
    const double down = objective(model, X, y, l2);
    theta = saved;
    const double g_fd = (up - down) / (2.0 * h);
    const double diff = std::abs(g_fd - g_an);
    if (std::abs(g_an) < 1e-4) {
      check.max_abs_err_small = std::max(check.max_abs_err_small, diff);
    } else {
      check.max_rel_err = std::max(check.max_rel_err, diff / std::abs(g_an));
    }
  };

  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (Index r = 0; r < model.weights[l].rows(); ++r) {
      for (Index c = 0; c < model.weights[l].cols(); ++c) {
        probe(model.weights[l](r, c), analytic.weights[l](r, c));
      }
    }
    for (Index i = 0; i < model.biases[l].size(); ++i) {
      probe(model.biases[l][i], analytic.biases[l][i]);
    }
  }
  return check;
}

// Random small net + batch with all relu preactivations off the kink, so
// the finite differences are well defined.
std::pair<MlpModel, std::pair<Matrix, Vector>> random_net_and_batch(
    Rng& rng, int attempt_limit = 200) {
  for (int attempt = 0; attempt < attempt_limit; ++attempt) {
    const int n_layers = 2 + static_cast<int>(rng.below(3));  // 2..4 widths
    std::vector<Index> widths;
    for (int l = 0; l < n_layers - 1; ++l) {
      widths.push_back(1 + static_cast<Index>(rng.below(10)));
    }
    widths.push_back(1);

    MlpModel model = init_parameters(arch_of(widths), rng.next_u64());
    for (auto& w : model.weights) {
      for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) {
          w(r, c) += 0.1 * rng.normal();
        }
      }
    }
    for (auto& b : model.biases) {
      for (Index i = 0; i < b.size(); ++i) {
        b[i] = 0.3 * rng.normal();
      }
    }

    const Index n = 1 + static_cast<Index>(rng.below(8));
    Matrix X(n, widths.front());
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < X.cols(); ++j) {
        X(i, j) = rng.normal();
      }
      y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    if (model.weights.size() == 1 ||
        min_preactivation_magnitude(model, X) > 1e-3) {
      return {std::move(model), {std::move(X), std::move(y)}};
    }
  }
  throw std::runtime_error("could not find a kink-free configuration");
}

}  // namespace

TEST_CASE("init_parameters is deterministic with bounded weights and zero biases") {
  const auto arch = arch_of({228, 220, 100, 5, 1});
  const auto a = init_parameters(arch, 0);
  const auto b = init_parameters(arch, 0);
  const auto c = init_parameters(arch, 1);

  bool identical = true;
  bool differs_across_seeds = false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    identical = identical && (a.weights[l] == b.weights[l]);
    differs_across_seeds =
        differs_across_seeds || (a.weights[l] != c.weights[l]);
    CHECK(a.biases[l].isZero(0.0));

    const double limit = std::sqrt(
        6.0 / static_cast<double>(arch.layer_widths[l] + arch.layer_widths[l + 1]));
    CHECK(a.weights[l].cwiseAbs().maxCoeff() <= limit);
  }
  CHECK(identical);
  CHECK(differs_across_seeds);
}

TEST_CASE("param_count closed form") {
  CHECK(param_count(arch_of({2, 1})) == 3);
  CHECK(param_count(arch_of({228, 220, 100, 5, 1})) == 72991);
  CHECK(param_count(arch_of({178, 220, 100, 5, 1})) == 61991);
  CHECK(param_count(arch_of({228, 220, 100, 5, 1})) -
            param_count(arch_of({178, 220, 100, 5, 1})) ==
        50 * 220);

  for (const auto& widths : {std::vector<Index>{2, 1},
                             std::vector<Index>{7, 3, 1},
                             std::vector<Index>{228, 220, 100, 5, 1}}) {
    const auto model = init_parameters(arch_of(widths), 3);
    CHECK(param_count(model.architecture) == stored_scalars(model));
  }
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS(param_count(arch_of({5})), ConfigError);
  CHECK_THROWS_AS(param_count(arch_of({5, 0, 1})), ConfigError);
  CHECK_THROWS_AS(param_count(arch_of({5, 3, 2})), ConfigError);
}

TEST_CASE("forward of the zero network is 0.5") {
  MlpModel model;
  model.architecture = arch_of({3, 4, 1});
  model.weights = {Matrix::Zero(4, 3), Matrix::Zero(1, 4)};
  model.biases = {Vector::Zero(4), Vector::Zero(1)};
  Vector x(3);
  x << -2.0, 7.5, 0.1;
  CHECK(forward(model, x) == 0.5);
}

TEST_CASE("forward sigmoid limits on the identity net") {
  MlpModel model;
  model.architecture = arch_of({1, 1});
  model.weights = {Matrix::Constant(1, 1, 1.0)};
  model.biases = {Vector::Zero(1)};

  Vector x(1);
  x << 0.0;
  CHECK(forward(model, x) == 0.5);
  x << 40.0;
  CHECK(forward(model, x) > 1.0 - 1e-12);
  CHECK(forward(model, x) < 1.0);
  x << -40.0;
  CHECK(forward(model, x) < 1e-12);
  CHECK(forward(model, x) > 0.0);

  // Saturated far beyond double resolution, still strictly inside (0,1).
  x << 1e6;
  CHECK(forward(model, x) < 1.0);
  x << -1e6;
  CHECK(forward(model, x) > 0.0);
}

TEST_CASE("forward matches a straight-line evaluator") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [model, batch] = random_net_and_batch(rng);
    const auto& [X, y] = batch;
    for (Index i = 0; i < X.rows(); ++i) {
      std::vector<double> x(static_cast<std::size_t>(X.cols()));
      for (Index j = 0; j < X.cols(); ++j) {
        x[static_cast<std::size_t>(j)] = X(i, j);
      }
      const double expected = straight_line_forward(model, x);
      const double actual = forward(model, X.row(i).transpose());
      CHECK(actual == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward arity mismatch") {
  const auto model = init_parameters(arch_of({4, 1}), 0);
  Vector x(3);
  x.setZero();
  CHECK_THROWS_AS(forward(model, x), DataError);
}

TEST_CASE("bce_loss closed forms") {
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(1.0, 1) == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-9));
  CHECK(bce_loss(1.0, 1) < 1.1e-7);
  CHECK(bce_loss(0.9, 0) == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  for (double p : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    CHECK(bce_loss(p, 0) >= 0.0);
    CHECK(bce_loss(p, 1) >= 0.0);
  }
}

TEST_CASE("backward closed form on the zero network") {
  MlpModel model;
  model.architecture = arch_of({2, 3, 1});
  model.weights = {Matrix::Zero(3, 2), Matrix::Zero(1, 3)};
  model.biases = {Vector::Zero(3), Vector::Zero(1)};

  Matrix X(1, 2);
  X << 0.7, -0.3;
  Vector y(1);
  y << 1.0;

  const auto grads = backward(model, X, y, 0.0);
  CHECK(grads.biases[1][0] == -0.5);  // p - y at p = 0.5
  CHECK(grads.weights[1].isZero(0.0));
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  Rng rng(1234);
  const auto [model, batch] = random_net_and_batch(rng);
  const auto& [X, y] = batch;

  Matrix X2(2 * X.rows(), X.cols());
  X2 << X, X;
  Vector y2(2 * y.size());
  y2 << y, y;

  const auto g1 = backward(model, X, y, 0.0);
  const auto g2 = backward(model, X2, y2, 0.0);
  for (std::size_t l = 0; l < g1.weights.size(); ++l) {
    CHECK((g1.weights[l] - g2.weights[l]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g1.biases[l] - g2.biases[l]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gradients match central finite differences on 100 random nets") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto [model, batch] = random_net_and_batch(rng);
    const auto& [X, y] = batch;
    const double l2 = trial % 3 == 0 ? 0.01 : 0.0;
    const FdCheck check = finite_difference_check(model, X, y, l2);
    CHECK(check.max_rel_err < 1e-4);
    CHECK(check.max_abs_err_small < 1e-7);
  }
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  auto model = init_parameters(arch_of({3, 4, 1}), 5);
  const auto original = model;
  auto state = make_adam_state(model);

  Gradients zero;
  for (const auto& w : model.weights) {
    zero.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : model.biases) {
    zero.biases.push_back(Vector::Zero(b.size()));
  }

  for (int step = 0; step < 25; ++step) {
    adam_step(model, zero, state, 0.01, {});
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    CHECK(model.weights[l] == original.weights[l]);
    CHECK(model.biases[l] == original.biases[l]);
  }
  CHECK(state.step == 25);
}

TEST_CASE("adam first step magnitude is the learning rate") {
  MlpModel model;
  model.architecture = arch_of({1, 1});
  model.weights = {Matrix::Constant(1, 1, 1.0)};
  model.biases = {Vector::Zero(1)};
  auto state = make_adam_state(model);

  Gradients grads;
  grads.weights = {Matrix::Constant(1, 1, 0.3)};
  grads.biases = {Vector::Zero(1)};

  adam_step(model, grads, state, 0.001, {});
  CHECK(std::abs(model.weights[0](0, 0) - (1.0 - 0.001)) < 1e-6 * 0.001 + 1e-12);
}

TEST_CASE("adam minimizes w^2 from w=1") {
  // Scalar convergence oracle run alongside the implementation.
  MlpModel model;
  model.architecture = arch_of({1, 1});
  model.weights = {Matrix::Constant(1, 1, 1.0)};
  model.biases = {Vector::Zero(1)};
  auto state = make_adam_state(model);

  bool converged = false;
  for (int step = 0; step < 1000; ++step) {
    Gradients grads;
    grads.weights = {Matrix::Constant(1, 1, 2.0 * model.weights[0](0, 0))};
    grads.biases = {Vector::Zero(1)};
    adam_step(model, grads, state, 0.01, {});
    if (std::abs(model.weights[0](0, 0)) < 0.01) {
      converged = true;
      break;
    }
  }
  CHECK(converged);
}

TEST_CASE("adam rejects non-finite gradients") {
  auto model = init_parameters(arch_of({2, 1}), 0);
  auto state = make_adam_state(model);
  Gradients grads;
  grads.weights = {
      Matrix::Constant(1, 2, std::numeric_limits<double>::quiet_NaN())};
  grads.biases = {Vector::Zero(1)};
  CHECK_THROWS_AS(adam_step(model, grads, state, 0.001, {}),
                  TrainingDivergence);
}

TEST_CASE("lr_at policies") {
  TrainConfig config;
  config.epochs = 1000;
  config.initial_lr = 0.001;

  SUBCASE("epoch 0 is exactly the initial rate for every policy") {
    for (auto kind : {LrPolicy::Kind::kExponential, LrPolicy::Kind::kStep,
                      LrPolicy::Kind::kConstant}) {
      config.lr_policy.kind = kind;
      CHECK(lr_at(config, 0) == 0.001);
    }
  }
  SUBCASE("exponential closed form") {
    config.lr_policy.kind = LrPolicy::Kind::kExponential;
    config.lr_policy.rate = 0.995;
    double expected = 0.001;
    for (int i = 0; i < 100; ++i) expected *= 0.995;  // independent route
    CHECK(lr_at(config, 100) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(lr_at(config, 100) == doctest::Approx(6.058e-4).epsilon(1e-4));
  }
  SUBCASE("step policy") {
    config.lr_policy.kind = LrPolicy::Kind::kStep;
    config.lr_policy.factor = 0.5;
    config.lr_policy.every = 100;
    CHECK(lr_at(config, 99) == 0.001);
    CHECK(lr_at(config, 100) == doctest::Approx(0.0005).epsilon(1e-15));
    CHECK(lr_at(config, 250) == doctest::Approx(0.00025).epsilon(1e-15));
    CHECK(lr_at(config, 300) == doctest::Approx(0.000125).epsilon(1e-15));
  }
  SUBCASE("constant policy") {
    config.lr_policy.kind = LrPolicy::Kind::kConstant;
    for (Index epoch : {Index{0}, Index{1}, Index{999}}) {
      CHECK(lr_at(config, epoch) == 0.001);
    }
  }
  SUBCASE("non-increasing for every policy") {
    for (auto kind : {LrPolicy::Kind::kExponential, LrPolicy::Kind::kStep,
                      LrPolicy::Kind::kConstant}) {
      config.lr_policy.kind = kind;
      double previous = std::numeric_limits<double>::infinity();
      for (Index epoch = 0; epoch < 1000; ++epoch) {
        const double lr = lr_at(config, epoch);
        CHECK(lr <= previous);
        previous = lr;
      }
    }
  }
  SUBCASE("out of range epoch") {
    CHECK_THROWS_AS(lr_at(config, -1), ConfigError);
    CHECK_THROWS_AS(lr_at(config, 1000), ConfigError);
  }
}

namespace {

// Tiny logistic-regression trainer: the independent separability oracle.
bool logistic_regression_separates(const Matrix& X, const Vector& y) {
  Vector w = Vector::Zero(X.cols());
  double b = 0.0;
  for (int iter = 0; iter < 3000; ++iter) {
    Vector z = X * w;
    z.array() += b;
    Vector p(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      p[i] = 1.0 / (1.0 + std::exp(-z[i]));
    }
    const Vector diff = (p - y) / static_cast<double>(X.rows());
    w -= 0.5 * (X.transpose() * diff);
    b -= 0.5 * diff.sum();
  }
  Vector z = X * w;
  z.array() += b;
  for (Index i = 0; i < z.size(); ++i) {
    if ((z[i] >= 0.0) != (y[i] >= 0.5)) return false;
  }
  return true;
}

std::pair<Matrix, Vector> separable_toy(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const bool positive = i % 2 == 0;
    // Two well-separated blobs.
    X(i, 0) = (positive ? 2.0 : -2.0) + 0.5 * rng.normal();
    X(i, 1) = (positive ? 1.5 : -1.5) + 0.5 * rng.normal();
    y[i] = positive ? 1.0 : 0.0;
  }
  return {X, y};
}

}  // namespace

TEST_CASE("train reaches full accuracy on a separable toy set") {
  const auto [X, y] = separable_toy(200, 7);
  REQUIRE(logistic_regression_separates(X, y));  // oracle: set is separable

  TrainConfig config;
  config.epochs = 200;
  config.seed = 11;
  const auto result = train(X, y, 1, arch_of({2, 8, 1}), config);
  CHECK(result.history.size() == 200);
  const auto report = evaluate(result.model, X, y, 0.5);
  CHECK(report.accuracy == 1.0);
}

TEST_CASE("train collapses to the majority on constant labels") {
  Rng rng(3);
  Matrix X(120, 3);
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      X(i, j) = rng.normal();
    }
  }
  const Vector y = Vector::Zero(120);

  TrainConfig config;
  config.epochs = 100;
  config.seed = 4;
  const auto result = train(X, y, 1, arch_of({3, 5, 1}), config);
  const Vector p = forward_batch(result.model, X);
  for (Index i = 0; i < p.size(); ++i) {
    CHECK(p[i] < 0.5);
  }
}

TEST_CASE("train is bit-deterministic under a fixed seed") {
  const auto [X, y] = separable_toy(90, 17);
  TrainConfig config;
  config.epochs = 40;
  config.seed = 21;
  const auto arch = arch_of({2, 6, 3, 1});

  const auto a = train(X, y, 1, arch, config);
  const auto b = train(X, y, 1, arch, config);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].mean_loss == b.history[e].mean_loss);
    CHECK(a.history[e].train_accuracy == b.history[e].train_accuracy);
    CHECK(a.history[e].lr == b.history[e].lr);
  }
  for (std::size_t l = 0; l < a.model.weights.size(); ++l) {
    CHECK(a.model.weights[l] == b.model.weights[l]);
    CHECK(a.model.biases[l] == b.model.biases[l]);
  }
}

TEST_CASE("train aborts with the epoch index on non-finite input") {
  Matrix X(4, 2);
  X.setZero();
  X(2, 1) = std::numeric_limits<double>::quiet_NaN();
  Vector y(4);
  y << 0, 1, 0, 1;
  TrainConfig config;
  config.epochs = 3;
  CHECK_THROWS_WITH_AS(train(X, y, 1, arch_of({2, 2, 1}), config),
                       doctest::Contains("epoch 0"), TrainingDivergence);
}

TEST_CASE("train validates the arity") {
  Matrix X(4, 3);
  X.setZero();
  Vector y = Vector::Zero(4);
  TrainConfig config;
  config.epochs = 1;
  CHECK_THROWS_AS(train(X, y, 1, arch_of({2, 2, 1}), config), DataError);
}

TEST_CASE("evaluate counts and rates") {
  // Threshold net: predicts 1 iff the single feature is positive.
  MlpModel model;
  model.architecture = arch_of({1, 1});
  model.weights = {Matrix::Constant(1, 1, 10.0)};
  model.biases = {Vector::Zero(1)};

  // 3 tp, 1 fn, 5 tn, 1 fp.
  Matrix X(10, 1);
  Vector y(10);
  Index row = 0;
  for (int i = 0; i < 3; ++i) { X(row, 0) = 1.0; y[row++] = 1.0; }
  for (int i = 0; i < 1; ++i) { X(row, 0) = -1.0; y[row++] = 1.0; }
  for (int i = 0; i < 5; ++i) { X(row, 0) = -1.0; y[row++] = 0.0; }
  for (int i = 0; i < 1; ++i) { X(row, 0) = 1.0; y[row++] = 0.0; }

  const auto report = evaluate(model, X, y, 0.5);
  CHECK(report.tp == 3);
  CHECK(report.fn == 1);
  CHECK(report.tn == 5);
  CHECK(report.fp == 1);
  CHECK(report.total() == 10);
  CHECK(report.sensitivity == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(report.specificity == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(report.accuracy == doctest::Approx(0.8).epsilon(1e-15));

  // Perfect predictions.
  Matrix Xp(4, 1);
  Xp << 1, 1, -1, -1;
  Vector yp(4);
  yp << 1, 1, 0, 0;
  const auto perfect = evaluate(model, Xp, yp, 0.5);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.sensitivity == 1.0);
  CHECK(perfect.specificity == 1.0);

  CHECK_THROWS_AS(evaluate(model, Matrix(0, 1), Vector(0), 0.5), DataError);
}

TEST_CASE("model save/load round trip") {
  const auto model = init_parameters(arch_of({5, 4, 1}), 77);
  const std::string first = model_to_json(model);
  const auto loaded = model_from_json(first);

  CHECK(loaded.schema_version == model.schema_version);
  CHECK(loaded.architecture.layer_widths == model.architecture.layer_widths);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    CHECK(loaded.weights[l] == model.weights[l]);  // bit-exact
    CHECK(loaded.biases[l] == model.biases[l]);
  }
  CHECK(model_to_json(loaded) == first);  // byte-identical re-save
}

TEST_CASE("model load rejects bad artifacts") {
  const auto model = init_parameters(arch_of({3, 2, 1}), 1);
  const std::string good = model_to_json(model);

  SUBCASE("truncated stream") {
    CHECK_THROWS_AS(model_from_json(good.substr(0, good.size() / 2)),
                    DataError);
  }
  SUBCASE("format version mismatch") {
    std::string tampered = good;
    const auto pos = tampered.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, std::string("\"format_version\": 1").size(),
                     "\"format_version\": 99");
    CHECK_THROWS_AS(model_from_json(tampered), DataError);
  }
  SUBCASE("shape inconsistency") {
    auto broken = model;
    broken.architecture.layer_widths[0] = 4;
    CHECK_THROWS_AS(model_from_json(model_to_json(broken)), DataError);
  }
  SUBCASE("not json at all") {
    CHECK_THROWS_AS(model_from_json("definitely not json"), DataError);
  }
}

TEST_CASE("forward stays strictly inside (0,1) for saturated nets") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto model = init_parameters(arch_of({4, 6, 1}), rng.next_u64());
    for (auto& w : model.weights) w *= 50.0;  // force saturation
    Matrix X(8, 4);
    for (Index i = 0; i < X.rows(); ++i) {
      for (Index j = 0; j < X.cols(); ++j) {
        X(i, j) = 10.0 * rng.normal();
      }
    }
    const Vector p = forward_batch(model, X);
    for (Index i = 0; i < p.size(); ++i) {
      CHECK(p[i] > 0.0);
      CHECK(p[i] < 1.0);
    }
  }
}
