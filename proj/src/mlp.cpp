#include "actlab/mlp.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "actlab/error.hpp"

namespace actlab {

const char* to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw Error(ErrorKind::InvalidArgument, "unknown optimizer '" + name + "'");
}

void MlpConfig::validate() const {
  if (input_dim == 0 || hidden_layers == 0 || width == 0 || output_dim == 0 ||
      batch_size == 0) {
    throw Error(ErrorKind::InvalidArgument, "MLP dimensions must be positive");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::InvalidArgument, "learning rate must be finite and >= 0");
  }
}

bool MlpParams::identical_weights(const MlpParams& other) const noexcept {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].weight.identical(other.layers[i].weight) ||
        !layers[i].bias.identical(other.layers[i].bias)) {
      return false;
    }
  }
  return true;
}

MlpParams init_params(const MlpConfig& cfg, SeededRng& rng) {
  cfg.validate();
  MlpParams p;
  std::size_t fan_in = cfg.input_dim;
  for (std::size_t l = 0; l <= cfg.hidden_layers; ++l) {
    const std::size_t fan_out = l == cfg.hidden_layers ? cfg.output_dim : cfg.width;
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    p.layers.push_back(Layer{rand_normal(rng, fan_in, fan_out, 0.0, sd),
                             Tensor2(1, fan_out, 0.0)});
    p.adam_m.push_back(Layer{Tensor2(fan_in, fan_out), Tensor2(1, fan_out)});
    p.adam_v.push_back(Layer{Tensor2(fan_in, fan_out), Tensor2(1, fan_out)});
    fan_in = fan_out;
  }
  return p;
}

Tensor2 forward_mlp(const MlpParams& params, const Activation& activation,
                    const Tensor2& x, ForwardCache* cache) {
  if (params.layers.empty() || x.cols() != params.layers.front().weight.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "input width does not match the first layer");
  }
  if (cache) {
    cache->layer_inputs.clear();
    cache->preactivations.clear();
    cache->activations.clear();
  }
  Tensor2 h = x;
  const std::size_t hidden = params.layers.size() - 1;
  for (std::size_t l = 0; l < hidden; ++l) {
    Tensor2 z = add_row_bias(matmul(h, params.layers[l].weight), params.layers[l].bias);
    if (cache) {
      cache->layer_inputs.push_back(std::move(h));
      cache->activations.emplace_back();
      h = activation.forward(z, cache->activations.back());
      cache->preactivations.push_back(std::move(z));
    } else {
      h = activation.forward(z);
    }
  }
  const Layer& head = params.layers.back();
  Tensor2 out = add_row_bias(matmul(h, head.weight), head.bias);
  if (cache) cache->layer_inputs.push_back(std::move(h));
  return out;
}

double mse(const Tensor2& prediction, const Tensor2& targets) {
  if (!prediction.same_shape(targets)) {
    throw Error(ErrorKind::ShapeMismatch, "prediction and target shapes differ");
  }
  auto p = prediction.data();
  auto t = targets.data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return s / static_cast<double>(p.size());
}

std::vector<Layer> backward_mlp(const MlpParams& params, const Activation& activation,
                                const ForwardCache& cache, const Tensor2& prediction,
                                const Tensor2& targets) {
  const std::size_t n_layers = params.layers.size();
  if (cache.layer_inputs.size() != n_layers) {
    throw Error(ErrorKind::InvalidArgument, "forward cache does not match the network");
  }
  Tensor2 delta = elementwise(prediction, targets, BinaryOp::Sub);
  const double scale = 2.0 / static_cast<double>(prediction.size());
  for (double& v : delta.data()) v *= scale;

  std::vector<Layer> grads(n_layers, Layer{Tensor2(1, 1), Tensor2(1, 1)});
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) delta = activation.backward(cache.activations[l], delta);
    grads[l].weight = matmul_tn(cache.layer_inputs[l], delta);
    grads[l].bias = sum_rows(delta);
    if (l > 0) delta = matmul_nt(delta, params.layers[l].weight);
  }
  return grads;
}

namespace {

void apply_update(const MlpConfig& cfg, MlpParams& p, const std::vector<Layer>& grads) {
  if (cfg.optimizer == OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      for (auto [param, grad] : {std::pair{&p.layers[l].weight, &grads[l].weight},
                                 std::pair{&p.layers[l].bias, &grads[l].bias}}) {
        auto w = param->data();
        auto g = grad->data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * g[i];
      }
    }
    return;
  }
  ++p.adam_step;
  const double t = static_cast<double>(p.adam_step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::array<std::array<Tensor2*, 3>, 2> groups{{
        {&p.layers[l].weight, &p.adam_m[l].weight, &p.adam_v[l].weight},
        {&p.layers[l].bias, &p.adam_m[l].bias, &p.adam_v[l].bias},
    }};
    const std::array<const Tensor2*, 2> gs{&grads[l].weight, &grads[l].bias};
    for (std::size_t k = 0; k < 2; ++k) {
      auto w = groups[k][0]->data();
      auto m = groups[k][1]->data();
      auto v = groups[k][2]->data();
      auto g = gs[k]->data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
      }
    }
  }
}

Split sample_batch(const Split& data, std::size_t batch, SeededRng& rng) {
  const std::size_t n = data.inputs.rows();
  const std::size_t din = data.inputs.cols();
  const std::size_t dout = data.targets.cols();
  Tensor2 x(batch, din);
  Tensor2 y(batch, dout);
  for (std::size_t r = 0; r < batch; ++r) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    std::memcpy(x.row(r).data(), data.inputs.row(idx).data(), din * sizeof(double));
    std::memcpy(y.row(r).data(), data.targets.row(idx).data(), dout * sizeof(double));
  }
  return {std::move(x), std::move(y)};
}

}  // namespace

TrainResult train(const MlpConfig& cfg, const Activation& activation, const Split& data,
                  SeededRng& rng) {
  cfg.validate();
  if (data.inputs.rows() != data.targets.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "inputs and targets differ in row count");
  }
  if (data.inputs.cols() != cfg.input_dim || data.targets.cols() != cfg.output_dim) {
    throw Error(ErrorKind::ShapeMismatch, "data does not match the MLP dimensions");
  }
  if (data.inputs.rows() < cfg.batch_size) {
    throw Error(ErrorKind::InvalidArgument, "training split smaller than one batch");
  }
  if (!activation.trainable()) {
    throw Error(ErrorKind::NotTrainable, "activation '" + activation.name() + "' is forward-only");
  }

  const auto start = std::chrono::steady_clock::now();
  SeededRng init_rng = rng.substream("init");
  SeededRng batch_rng = rng.substream("batches");
  TrainResult result{init_params(cfg, init_rng), {}};
  TrainReport& report = result.report;
  report.loss_trace.reserve(cfg.train_steps);

  for (std::size_t step = 0; step < cfg.train_steps; ++step) {
    const Split batch = sample_batch(data, cfg.batch_size, batch_rng);
    double loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<Layer> grads;
    try {
      ForwardCache cache;
      const Tensor2 pred = forward_mlp(result.params, activation, batch.inputs, &cache);
      loss = mse(pred, batch.targets);
      if (std::isfinite(loss)) {
        grads = backward_mlp(result.params, activation, cache, pred, batch.targets);
      }
    } catch (const NonFiniteOutput&) {
      loss = std::numeric_limits<double>::quiet_NaN();
    }
    report.loss_trace.push_back(loss);
    if (!std::isfinite(loss)) {
      report.diverged = true;
      report.diverged_step = step;
      report.loss_trace.resize(cfg.train_steps, loss);
      break;
    }
    apply_update(cfg, result.params, grads);
  }

  report.steps = cfg.train_steps;
  report.final_train_mse = report.loss_trace.empty()
                               ? std::numeric_limits<double>::quiet_NaN()
                               : report.loss_trace.back();
  if (!report.diverged) {
    // Loss of the final parameters on the whole training split.
    report.final_train_mse = evaluate(cfg, result.params, activation, data);
    if (!std::isfinite(report.final_train_mse)) {
      report.diverged = true;
      report.diverged_step = cfg.train_steps;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double evaluate(const MlpConfig& cfg, const MlpParams& params, const Activation& activation,
                const Split& split) {
  const std::size_t n = split.inputs.rows();
  const std::size_t din = split.inputs.cols();
  const std::size_t dout = split.targets.cols();
  const std::size_t chunk = cfg.batch_size;
  double total = 0.0;
  try {
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t rows = std::min(chunk, n - start);
      auto in = split.inputs.data().subspan(start * din, rows * din);
      auto tg = split.targets.data().subspan(start * dout, rows * dout);
      const Tensor2 x(rows, din, std::vector<double>(in.begin(), in.end()));
      const Tensor2 pred = forward_mlp(params, activation, x);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - tg[i];
        total += d * d;
      }
    }
  } catch (const NonFiniteOutput&) {
    return std::numeric_limits<double>::infinity();
  }
  const double result = total / static_cast<double>(split.targets.size());
  return std::isfinite(result) ? result : std::numeric_limits<double>::infinity();
}

std::vector<double> collect_preactivations(const MlpParams& params,
                                           const Activation& activation, const Tensor2& x) {
  ForwardCache cache;
  forward_mlp(params, activation, x, &cache);
  std::vector<double> out;
  for (const auto& z : cache.preactivations) {
    out.insert(out.end(), z.data().begin(), z.data().end());
  }
  return out;
}

}  // namespace actlab
