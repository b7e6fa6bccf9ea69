#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clinrec/matrix.hpp"
#include "clinrec/rng.hpp"

namespace clinrec::nn {

/// Fully connected layer: y = W x + b, W stored out_dim x in_dim.
class DenseLayer {
 public:
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : weights_(out_dim, in_dim), biases_(out_dim, 0.0) {}

  std::size_t in_dim() const { return weights_.cols(); }
  std::size_t out_dim() const { return weights_.rows(); }

  const Matrix& weights() const { return weights_; }
  const std::vector<double>& biases() const { return biases_; }

  // Mutable views keep the dimensions fixed.
  std::span<double> weight_values() { return weights_.values(); }
  std::span<double> bias_values() { return biases_; }

  bool operator==(const DenseLayer&) const = default;

 private:
  Matrix weights_;
  std::vector<double> biases_;
};

/// ReLU hidden layers, sigmoid output, inverted dropout after every hidden
/// activation. Shared by every network in the project.
class MlpModel {
 public:
  MlpModel(std::vector<DenseLayer> layers, double dropout_p);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  std::vector<std::size_t> layer_dims() const;
  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }

  double dropout_p() const { return dropout_p_; }
  void set_dropout_p(double p);

  /// Bumped by every sgd_step; lets backward() reject stale caches.
  std::uint64_t generation() const { return generation_; }
  void bump_generation() { ++generation_; }

  /// Parameter equality (ignores the generation counter).
  bool same_parameters(const MlpModel& other) const {
    return dropout_p_ == other.dropout_p_ && layers_ == other.layers_;
  }

 private:
  std::vector<DenseLayer> layers_;
  double dropout_p_;
  std::uint64_t generation_ = 0;
};

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 400;
  std::size_t batch_size = 256;
  double dropout_p = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

enum class Mode { train, infer };

/// Intermediate values of one train-mode forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer (after dropout)
  std::vector<Matrix> pre_activations; // per layer
  std::vector<Matrix> dropout_masks;   // per hidden layer: 0 or 1/(1-p)
  Matrix output;
  std::uint64_t generation = 0;
};

struct ForwardResult {
  Matrix output;
  std::optional<ForwardCache> cache;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

MlpModel init_model(std::span<const std::size_t> layer_dims, double dropout_p,
                    std::uint64_t seed);

/// Batch forward pass; rows of `batch` are samples. Train mode draws dropout
/// masks from `rng` (required when dropout_p > 0) and fills the cache.
ForwardResult forward(const MlpModel& model, const Matrix& batch, Mode mode,
                      Rng* rng = nullptr);

/// Inference on a batch (no dropout).
Matrix predict(const MlpModel& model, const Matrix& batch);
std::vector<double> predict(const MlpModel& model, std::span<const double> input);

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Mean squared error over every entry of the batch.
double batch_mse(const Matrix& pred, const Matrix& target);

/// Gradient of batch_mse(output, target) with respect to every parameter.
Gradients backward(const MlpModel& model, const std::optional<ForwardCache>& cache,
                   const Matrix& target);

void sgd_step(MlpModel& model, const Gradients& grads, double learning_rate);

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;
};

/// Mini-batch SGD. The trained model takes config.dropout_p. The final
/// partial batch is used. Deterministic given config.seed.
TrainResult train(MlpModel model, const Matrix& inputs, const Matrix& targets,
                  const TrainConfig& config);

}  // namespace clinrec::nn
