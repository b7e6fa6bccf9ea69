#include "clinrec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "clinrec/error.hpp"

namespace clinrec::nn {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix transposed(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

void check_dropout(double p) {
  if (!(p >= 0.0 && p < 1.0))
    throw UsageError("dropout_p must lie in [0, 1), got " + std::to_string(p));
}

}  // namespace

MlpModel::MlpModel(std::vector<DenseLayer> layers, double dropout_p)
    : layers_(std::move(layers)), dropout_p_(dropout_p) {
  if (layers_.empty()) throw UsageError("MlpModel needs at least one layer");
  check_dropout(dropout_p);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    if (layers_[i].out_dim() != layers_[i + 1].in_dim())
      throw ShapeError("layer " + std::to_string(i) + " out_dim " +
                       std::to_string(layers_[i].out_dim()) + " != layer " +
                       std::to_string(i + 1) + " in_dim " +
                       std::to_string(layers_[i + 1].in_dim()));
  }
}

std::vector<std::size_t> MlpModel::layer_dims() const {
  std::vector<std::size_t> dims{layers_.front().in_dim()};
  for (const auto& l : layers_) dims.push_back(l.out_dim());
  return dims;
}

void MlpModel::set_dropout_p(double p) {
  check_dropout(p);
  dropout_p_ = p;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw UsageError("learning_rate must be finite and non-negative");
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  check_dropout(dropout_p);
}

MlpModel init_model(std::span<const std::size_t> layer_dims, double dropout_p,
                    std::uint64_t seed) {
  if (layer_dims.size() < 2) throw UsageError("init_model needs at least two dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw UsageError("init_model: layer dims must be positive");

  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    DenseLayer layer(layer_dims[i], layer_dims[i + 1]);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer_dims[i] + layer_dims[i + 1]));
    for (double& w : layer.weight_values()) w = rng.uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers), dropout_p);
}

ForwardResult forward(const MlpModel& model, const Matrix& batch, Mode mode, Rng* rng) {
  if (batch.cols() != model.input_dim())
    throw ShapeError("forward: input width " + std::to_string(batch.cols()) +
                     " != model input dim " + std::to_string(model.input_dim()));
  const bool training = mode == Mode::train;
  const double p = model.dropout_p();
  if (training && p > 0.0 && rng == nullptr)
    throw UsageError("forward: train mode with dropout needs an rng");

  ForwardResult result;
  if (training) {
    result.cache.emplace();
    result.cache->generation = model.generation();
  }

  const auto& layers = model.layers();
  Matrix current = batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    Matrix z;
    multiply(current, transposed(layer.weights()), z);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.biases()[c];
    }
    if (training) result.cache->inputs.push_back(std::move(current));

    const bool last = l + 1 == layers.size();
    Matrix a(z.rows(), z.cols());
    if (last) {
      for (std::size_t i = 0; i < z.size(); ++i) a.values()[i] = sigmoid(z.values()[i]);
    } else {
      for (std::size_t i = 0; i < z.size(); ++i)
        a.values()[i] = std::max(0.0, z.values()[i]);
      if (training && p > 0.0) {
        Matrix mask(z.rows(), z.cols());
        const double keep_scale = 1.0 / (1.0 - p);
        for (std::size_t i = 0; i < mask.size(); ++i) {
          mask.values()[i] = rng->uniform() < p ? 0.0 : keep_scale;
          a.values()[i] *= mask.values()[i];
        }
        result.cache->dropout_masks.push_back(std::move(mask));
      }
    }
    if (training) result.cache->pre_activations.push_back(std::move(z));
    current = std::move(a);
  }
  if (training) result.cache->output = current;
  result.output = std::move(current);
  return result;
}

Matrix predict(const MlpModel& model, const Matrix& batch) {
  return forward(model, batch, Mode::infer).output;
}

std::vector<double> predict(const MlpModel& model, std::span<const double> input) {
  Matrix batch(1, input.size());
  std::copy(input.begin(), input.end(), batch.values().begin());
  const Matrix out = predict(model, batch);
  return {out.values().begin(), out.values().end()};
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw ShapeError("mse_loss: pred length " + std::to_string(pred.size()) +
                     " != target length " + std::to_string(target.size()));
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

double batch_mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("batch_mse: prediction and target shapes differ");
  return mse_loss(pred.values(), target.values());
}

Gradients backward(const MlpModel& model, const std::optional<ForwardCache>& cache,
                   const Matrix& target) {
  if (!cache) throw UsageError("backward: no cache (forward was not run in train mode)");
  if (cache->generation != model.generation())
    throw UsageError("backward: cache is stale (model updated since forward)");
  const auto& layers = model.layers();
  if (cache->inputs.size() != layers.size())
    throw UsageError("backward: cache does not belong to this model");
  const Matrix& out = cache->output;
  if (target.rows() != out.rows() || target.cols() != out.cols())
    throw ShapeError("backward: target " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + " != output " +
                     std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
  const bool has_masks = !cache->dropout_masks.empty();

  Gradients g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());

  // dL/dz for the sigmoid output layer.
  const double scale = 2.0 / static_cast<double>(out.size());
  Matrix dz(out.rows(), out.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = out.values()[i];
    dz.values()[i] = scale * (y - target.values()[i]) * y * (1.0 - y);
  }

  for (std::size_t l = layers.size(); l-- > 0;) {
    multiply_transposed_lhs(dz, cache->inputs[l], g.weights[l]);
    g.biases[l].assign(dz.cols(), 0.0);
    for (std::size_t r = 0; r < dz.rows(); ++r) {
      auto row = dz.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) g.biases[l][c] += row[c];
    }
    if (l == 0) break;

    Matrix dinput;
    multiply(dz, layers[l].weights(), dinput);
    const Matrix& z_prev = cache->pre_activations[l - 1];
    for (std::size_t i = 0; i < dinput.size(); ++i) {
      double d = z_prev.values()[i] > 0.0 ? dinput.values()[i] : 0.0;
      if (has_masks) d *= cache->dropout_masks[l - 1].values()[i];
      dinput.values()[i] = d;
    }
    dz = std::move(dinput);
  }
  return g;
}

void sgd_step(MlpModel& model, const Gradients& grads, double learning_rate) {
  auto& layers = model.mutable_layers();
  if (grads.weights.size() != layers.size() || grads.biases.size() != layers.size())
    throw ShapeError("sgd_step: gradient layer count differs from model");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& gw = grads.weights[l];
    const auto& gb = grads.biases[l];
    if (gw.rows() != layers[l].out_dim() || gw.cols() != layers[l].in_dim() ||
        gb.size() != layers[l].out_dim())
      throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    const bool finite =
        std::all_of(gw.values().begin(), gw.values().end(),
                    [](double v) { return std::isfinite(v); }) &&
        std::all_of(gb.begin(), gb.end(), [](double v) { return std::isfinite(v); });
    if (!finite)
      throw TrainingError("sgd_step: non-finite gradient in layer " + std::to_string(l));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l].weight_values();
    const auto gw = grads.weights[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * gw[i];
    auto b = layers[l].bias_values();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= learning_rate * grads.biases[l][i];
  }
  model.bump_generation();
}

TrainResult train(MlpModel model, const Matrix& inputs, const Matrix& targets,
                  const TrainConfig& config) {
  config.validate();
  if (inputs.rows() == 0) throw UsageError("train: empty dataset");
  if (inputs.rows() != targets.rows())
    throw ShapeError("train: " + std::to_string(inputs.rows()) + " inputs vs " +
                     std::to_string(targets.rows()) + " targets");
  if (inputs.cols() != model.input_dim())
    throw ShapeError("train: input width " + std::to_string(inputs.cols()) +
                     " != model input dim " + std::to_string(model.input_dim()));
  if (targets.cols() != model.output_dim())
    throw ShapeError("train: target width " + std::to_string(targets.cols()) +
                     " != model output dim " + std::to_string(model.output_dim()));

  model.set_dropout_p(config.dropout_p);
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));

  const std::size_t n = inputs.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{std::move(model), {}};
  result.loss_history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      Matrix x(count, inputs.cols());
      Matrix y(count, targets.cols());
      for (std::size_t i = 0; i < count; ++i) {
        std::ranges::copy(inputs.row(order[start + i]), x.row(i).begin());
        std::ranges::copy(targets.row(order[start + i]), y.row(i).begin());
      }
      auto fwd = forward(result.model, x, Mode::train, &dropout_rng);
      loss_sum += batch_mse(fwd.output, y) * static_cast<double>(count);
      const Gradients g = backward(result.model, fwd.cache, y);
      sgd_step(result.model, g, config.learning_rate);
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw TrainingError("train: loss became non-finite at epoch " + std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

}  // namespace clinrec::nn
