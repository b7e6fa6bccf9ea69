#include <cmath>
#include <numeric>

#include "clinrec/error.hpp"
#include "clinrec/nn.hpp"
#include "clinrec/nn_json.hpp"
#include "doctest.h"

using namespace clinrec;
using namespace clinrec::nn;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

Matrix random_targets(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  return m;
}

/// Train-mode loss with a dropout stream restarted from `mask_seed`, so
/// every evaluation replays the same masks.
double loss_with_masks(const MlpModel& m, const Matrix& x, const Matrix& y, std::uint64_t mask_seed) {
  Rng rng(mask_seed);
  return batch_mse(forward(m, x, Mode::train, &rng).output, y);
}

/// Largest relative error between backward() and central differences.
double gradient_check(std::span<const std::size_t> dims, double dropout, std::uint64_t seed) {
  MlpModel model = init_model(dims, dropout, seed);
  // Non-zero biases so every bias gradient path is exercised.
  Rng brng(seed + 1);
  for (auto& layer : model.mutable_layers())
    for (double& b : layer.bias_values()) b = brng.uniform(-0.3, 0.3);
  const Matrix x = random_batch(5, dims.front(), seed + 2);
  const Matrix y = random_targets(5, dims.back(), seed + 3);
  const std::uint64_t mask_seed = seed + 4;

  Rng rng(mask_seed);
  auto fwd = forward(model, x, Mode::train, &rng);
  const Gradients g = backward(model, fwd.cache, y);

  constexpr double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = loss_with_masks(model, x, y, mask_seed);
    param = saved - h;
    const double down = loss_with_masks(model, x, y, mask_seed);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  auto& layers = model.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l].weight_values();
    for (std::size_t i = 0; i < w.size(); ++i) check(w[i], g.weights[l].values()[i]);
    auto b = layers[l].bias_values();
    for (std::size_t i = 0; i < b.size(); ++i) check(b[i], g.biases[l][i]);
  }
  return worst;
}

MlpModel single_unit(double w, double b) {
  DenseLayer layer(1, 1);
  layer.weight_values()[0] = w;
  layer.bias_values()[0] = b;
  return MlpModel({layer}, 0.0);
}

}  // namespace

TEST_CASE("forward: zero weights give sigmoid(0)") {
  const MlpModel m = single_unit(0.0, 0.0);
  Matrix x(1, 1);
  x(0, 0) = 3.7;
  CHECK(predict(m, x)(0, 0) == 0.5);
}

TEST_CASE("forward: ReLU hidden layer clamps negatives") {
  DenseLayer a(2, 2), b(2, 1);
  a.weight_values()[0] = 1.0;  // identity
  a.weight_values()[3] = 1.0;
  MlpModel m({a, b}, 0.0);
  Matrix x(1, 2);
  x(0, 0) = -1.0;
  x(0, 1) = 2.0;
  auto fwd = forward(m, x, Mode::train, nullptr);
  REQUIRE(fwd.cache);
  const Matrix& hidden = fwd.cache->inputs[1];
  CHECK(hidden(0, 0) == 0.0);
  CHECK(hidden(0, 1) == 2.0);
}

TEST_CASE("forward: diagnostic architecture maps 310 inputs to 60 scores in (0,1)") {
  const std::vector<std::size_t> dims{310, 200, 100, 80, 60};
  const MlpModel m = init_model(dims, 0.3, 11);
  const Matrix out = predict(m, random_batch(4, 310, 12));
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 60);
  for (double v : out.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("forward: width mismatch names both dims") {
  const std::vector<std::size_t> dims{3, 2};
  const MlpModel m = init_model(dims, 0.0, 1);
  try {
    predict(m, Matrix(1, 4));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('4') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("forward: infer mode is a pure function") {
  const std::vector<std::size_t> dims{6, 5, 4};
  const MlpModel m = init_model(dims, 0.3, 5);
  const Matrix x = random_batch(3, 6, 6);
  const Matrix a = predict(m, x);
  const Matrix b = predict(m, x);
  CHECK(a == b);
  CHECK_FALSE(forward(m, x, Mode::infer).cache.has_value());
}

TEST_CASE("forward: train mode with dropout needs an rng") {
  const std::vector<std::size_t> dims{2, 3, 1};
  const MlpModel m = init_model(dims, 0.3, 5);
  CHECK_THROWS_AS(forward(m, Matrix(1, 2), Mode::train, nullptr), UsageError);
}

TEST_CASE("inverted dropout keeps the expected activation scale") {
  const std::vector<std::size_t> dims{4, 200, 1};
  const MlpModel m = init_model(dims, 0.3, 3);
  Rng rng(99);
  auto fwd = forward(m, random_batch(64, 4, 4), Mode::train, &rng);
  const auto mask = fwd.cache->dropout_masks.at(0).values();
  REQUIRE(mask.size() >= 10000);
  const double mean = std::accumulate(mask.begin(), mask.end(), 0.0) / static_cast<double>(mask.size());
  CHECK(std::abs(mean - 1.0) < 0.02);
  for (double v : mask) CHECK((v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15));
}

TEST_CASE("mse_loss examples") {
  const std::vector<double> a{0.3, 0.7};
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(std::vector<double>{1, 0}, std::vector<double>{0, 0}) == 0.5);
  CHECK(mse_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}) == 0.25);
  CHECK_THROWS_AS(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("backward: zero loss gives zero gradients") {
  const std::vector<std::size_t> dims{4, 6, 3};
  const MlpModel m = init_model(dims, 0.0, 8);
  auto fwd = forward(m, random_batch(5, 4, 9), Mode::train, nullptr);
  const Gradients g = backward(m, fwd.cache, fwd.output);
  for (const auto& w : g.weights)
    for (double v : w.values()) CHECK(v == 0.0);
  for (const auto& b : g.biases)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("backward: single sigmoid unit matches the hand-derived chain") {
  const double w = 0.7, b = -0.2, x = 1.3, t = 1.0;
  const MlpModel m = single_unit(w, b);
  Matrix in(1, 1), target(1, 1);
  in(0, 0) = x;
  target(0, 0) = t;
  auto fwd = forward(m, in, Mode::train, nullptr);
  const Gradients g = backward(m, fwd.cache, target);
  // L = (s - t)^2, s = sigmoid(w x + b): dL/dw = 2 (s - t) s (1 - s) x.
  const double s = 1.0 / (1.0 + std::exp(-(w * x + b)));
  CHECK(std::abs(g.weights[0](0, 0) - 2.0 * (s - t) * s * (1.0 - s) * x) < 1e-12);
  CHECK(std::abs(g.biases[0][0] - 2.0 * (s - t) * s * (1.0 - s)) < 1e-12);
}

TEST_CASE("backward: agrees with central finite differences") {
  const std::vector<std::size_t> dims{6, 7, 5, 3};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    CHECK(gradient_check(dims, 0.0, seed) < 1e-4);
    CHECK(gradient_check(dims, 0.3, seed * 101) < 1e-4);  // masks replayed from the cache
  }
}

TEST_CASE("backward: missing or stale cache is a usage error") {
  const std::vector<std::size_t> dims{2, 3, 1};
  MlpModel m = init_model(dims, 0.0, 1);
  const Matrix x = random_batch(2, 2, 2);
  const Matrix y = random_targets(2, 1, 3);
  CHECK_THROWS_AS(backward(m, std::nullopt, y), UsageError);
  auto fwd = forward(m, x, Mode::train, nullptr);
  const Gradients g = backward(m, fwd.cache, y);
  sgd_step(m, g, 0.1);
  CHECK_THROWS_AS(backward(m, fwd.cache, y), UsageError);
}

TEST_CASE("sgd_step examples") {
  MlpModel m = single_unit(1.0, 0.0);
  Gradients g{{Matrix(1, 1, 2.0)}, {{0.0}}};
  MlpModel same = m;
  sgd_step(same, g, 0.0);
  CHECK(same.same_parameters(m));
  sgd_step(m, g, 0.1);
  CHECK(m.layers()[0].weights()(0, 0) == doctest::Approx(0.8).epsilon(1e-15));

  Gradients bad{{Matrix(1, 1, std::nan(""))}, {{0.0}}};
  try {
    sgd_step(m, bad, 0.1);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("sgd_step: one small step decreases a convex one-parameter loss") {
  MlpModel m = single_unit(0.5, 0.0);
  Matrix x(1, 1, 1.0), y(1, 1, 1.0);
  auto fwd = forward(m, x, Mode::train, nullptr);
  const double before = batch_mse(fwd.output, y);
  sgd_step(m, backward(m, fwd.cache, y), 0.01);
  CHECK(batch_mse(predict(m, x), y) < before);
}

TEST_CASE("train: lr = 0 leaves the initialization untouched") {
  const std::vector<std::size_t> dims{3, 4, 2};
  const MlpModel init = init_model(dims, 0.3, 21);
  TrainConfig c{0.0, 1, 2, 0.3, 5};
  const auto result = train(init, random_batch(5, 3, 1), random_targets(5, 2, 2), c);
  CHECK(result.model.same_parameters(init));
  CHECK(result.loss_history.size() == 1);
}

TEST_CASE("train: learns XOR") {
  Matrix x(4, 2), y(4, 1);
  const double xs[4][3] = {{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  for (int i = 0; i < 4; ++i) {
    x(i, 0) = xs[i][0];
    x(i, 1) = xs[i][1];
    y(i, 0) = xs[i][2];
  }
  const std::vector<std::size_t> dims{2, 8, 1};
  TrainConfig c{1.0, 2000, 4, 0.0, 1};
  const auto result = train(init_model(dims, 0.0, 1), x, y, c);
  CHECK(batch_mse(predict(result.model, x), y) < 0.05);
  CHECK(result.loss_history.size() == 2000);
}

TEST_CASE("train: same seed gives bit-identical loss histories") {
  const std::vector<std::size_t> dims{5, 6, 3};
  const Matrix x = random_batch(23, 5, 1);
  const Matrix y = random_targets(23, 3, 2);
  TrainConfig c{0.2, 7, 4, 0.3, 77};
  const auto a = train(init_model(dims, 0.3, 9), x, y, c);
  const auto b = train(init_model(dims, 0.3, 9), x, y, c);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.model.same_parameters(b.model));
  c.seed = 78;
  CHECK(train(init_model(dims, 0.3, 9), x, y, c).loss_history != a.loss_history);
}

TEST_CASE("train: default hyperparameters keep the loss finite") {
  const std::vector<std::size_t> dims{310, 200, 100, 80, 60};
  TrainConfig c;  // lr 0.001, batch 256, dropout 0.3
  c.epochs = 3;
  const auto result = train(init_model(dims, c.dropout_p, 4), random_batch(300, 310, 5),
                            random_targets(300, 60, 6), c);
  REQUIRE(result.loss_history.size() == 3);
  for (double l : result.loss_history) CHECK(std::isfinite(l));
}

TEST_CASE("train: precondition errors") {
  const std::vector<std::size_t> dims{2, 1};
  const MlpModel m = init_model(dims, 0.0, 1);
  CHECK_THROWS_AS(train(m, Matrix(0, 2), Matrix(0, 1), TrainConfig{}), UsageError);
  CHECK_THROWS_AS(train(m, Matrix(1, 2), Matrix(1, 1), TrainConfig{0.1, 0, 1, 0.0, 0}), UsageError);
  CHECK_THROWS_AS(train(m, Matrix(1, 2), Matrix(1, 1), TrainConfig{0.1, 1, 0, 0.0, 0}), UsageError);
  CHECK_THROWS_AS(train(m, Matrix(1, 3), Matrix(1, 1), TrainConfig{}), ShapeError);
}

TEST_CASE("init_model: chained dims, Glorot bounds, zero biases, seeded") {
  const std::vector<std::size_t> dm{310, 200, 100, 80, 60};
  const MlpModel a = init_model(dm, 0.3, 42);
  CHECK(a.layers().size() == 4);
  CHECK(a.layer_dims() == dm);
  for (const auto& layer : a.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
    for (double w : layer.weights().values()) CHECK(std::abs(w) <= limit);
    for (double b : layer.biases()) CHECK(b == 0.0);
  }
  CHECK(init_model(dm, 0.3, 42).same_parameters(a));
  CHECK_FALSE(init_model(dm, 0.3, 43).same_parameters(a));

  const std::vector<std::size_t> ae{60, 60, 40, 60, 60};
  CHECK(init_model(ae, 0.3, 1).layers().size() == 4);
  const std::vector<std::size_t> zero{3, 0, 2};
  CHECK_THROWS_AS(init_model(zero, 0.0, 1), UsageError);
  const std::vector<std::size_t> one{3};
  CHECK_THROWS_AS(init_model(one, 0.0, 1), UsageError);
}

TEST_CASE("MlpModel rejects unchained layers") {
  CHECK_THROWS_AS(MlpModel({DenseLayer(2, 3), DenseLayer(4, 1)}, 0.0), ShapeError);
  CHECK_THROWS_AS(MlpModel({DenseLayer(2, 3)}, 1.0), UsageError);
}

TEST_CASE("model JSON round-trip is value-exact") {
  const std::vector<std::size_t> dims{7, 5, 3};
  MlpModel m = init_model(dims, 0.3, 17);
  Rng rng(3);
  for (double& b : m.mutable_layers()[0].bias_values()) b = rng.normal() * 1e-7;
  const auto doc = to_json(m);
  CHECK(doc["format_version"] == kModelFormatVersion);
  const MlpModel back = model_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.same_parameters(m));

  auto wrong = doc;
  wrong["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(wrong), LoadError);
  auto missing = doc;
  missing.erase("dropout_p");
  try {
    model_from_json(missing);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("dropout_p") != std::string::npos);
  }
}
