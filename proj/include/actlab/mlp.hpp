#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "actlab/activation.hpp"
#include "actlab/rng.hpp"
#include "actlab/tensor.hpp"

namespace actlab {

enum class OptimizerKind { Adam, Sgd };

const char* to_string(OptimizerKind kind) noexcept;
OptimizerKind optimizer_from_string(const std::string& name);

/// Inputs paired with regression targets (one row per sample).
struct Split {
  Tensor2 inputs;
  Tensor2 targets;
};

/// Defaults are the lab's internal-loop hyperparameters.
struct MlpConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_layers = 3;
  std::size_t width = 64;
  std::size_t output_dim = 1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t train_steps = 50;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws InvalidArgument on zero sizes or a negative/non-finite rate.
  void validate() const;
};

struct Layer {
  Tensor2 weight;  // fan_in x fan_out
  Tensor2 bias;    // 1 x fan_out
};

struct MlpParams {
  std::vector<Layer> layers;  // hidden layers followed by the linear head
  std::vector<Layer> adam_m;
  std::vector<Layer> adam_v;
  std::size_t adam_step = 0;

  /// Bitwise comparison of weights and biases (optimizer state ignored).
  bool identical_weights(const MlpParams& other) const noexcept;
};

struct ForwardCache {
  std::vector<Tensor2> layer_inputs;  // input to each layer, head included
  std::vector<Tensor2> preactivations;
  std::vector<ActivationCache> activations;
};

struct TrainReport {
  double final_train_mse = 0.0;
  std::vector<double> loss_trace;
  std::size_t steps = 0;
  double wall_seconds = 0.0;
  bool diverged = false;
  std::optional<std::size_t> diverged_step;
};

struct TrainResult {
  MlpParams params;
  TrainReport report;
};

/// He-normal weights, zero biases.
MlpParams init_params(const MlpConfig& cfg, SeededRng& rng);

/// Prediction of shape (batch, output_dim). The activation follows every
/// hidden layer; the head is linear.
Tensor2 forward_mlp(const MlpParams& params, const Activation& activation,
                    const Tensor2& x, ForwardCache* cache = nullptr);

/// Gradients of mean squared error with respect to every layer, in the
/// same order as params.layers.
std::vector<Layer> backward_mlp(const MlpParams& params, const Activation& activation,
                                const ForwardCache& cache, const Tensor2& prediction,
                                const Tensor2& targets);

double mse(const Tensor2& prediction, const Tensor2& targets);

/// Minibatch training on `data`. Batches are drawn with replacement, fresh
/// each step. A non-finite loss marks the run diverged and stops updates;
/// the remaining trace entries repeat the non-finite loss.
TrainResult train(const MlpConfig& cfg, const Activation& activation, const Split& data,
                  SeededRng& rng);

/// Mean squared error over the split, evaluated in chunks of
/// cfg.batch_size rows. Returns +inf if the network produces non-finite
/// values.
double evaluate(const MlpConfig& cfg, const MlpParams& params, const Activation& activation,
                const Split& split);

/// Hidden-layer pre-activations for `x`, layer by layer, row-major.
std::vector<double> collect_preactivations(const MlpParams& params,
                                           const Activation& activation, const Tensor2& x);

}  // namespace actlab
