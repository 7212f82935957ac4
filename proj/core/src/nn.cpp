#include "aep/nn.hpp"

#include <cmath>
#include <string>

#include "aep/error.hpp"

namespace aep::nn {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

// Keep-mask from the dropout logit and the logit of the uniform draw.
double mask_from_logits(double dropout_logit, double noise_logit, double temperature) {
  return sigmoid(-(dropout_logit + noise_logit) / temperature);
}

void dense_forward(const DenseLayer& layer, const Matrix& input, Matrix& pre, Matrix& out) {
  matmul(input, layer.weights, pre);
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    auto row = pre.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  out = pre;
  if (layer.activation == Activation::relu) {
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  }
}

void check_input(const NetworkParameters& params, const Matrix& features) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (features.rows() == 0) throw ShapeError("forward: batch must contain at least one row");
  if (features.cols() != params.input_dim()) {
    throw ShapeError("forward: feature dimension " + std::to_string(features.cols()) +
                     " does not match network input " + std::to_string(params.input_dim()));
  }
  if (!features.all_finite()) throw ValidationError("forward: non-finite feature value");
}

ForwardResult run_forward(const NetworkParameters& params, const Matrix& features,
                          const DropoutNoise* noise) {
  check_input(params, features);
  const bool sampled = noise != nullptr && params.has_dropout();
  ForwardResult result;
  result.tape.mode = noise != nullptr ? ForwardMode::sampled : ForwardMode::deterministic;
  result.tape.revision = params.revision;
  result.tape.batch = features.rows();
  result.tape.layers.resize(params.layers.size());

  const Matrix* current = &features;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const DenseLayer& layer = params.layers[k];
    LayerTape& rec = result.tape.layers[k];
    rec.input = *current;
    rec.mask = Matrix(current->rows(), current->cols(), 1.0);
    if (sampled && k > 0) {
      const Matrix& u = noise->uniforms.at(k);
      if (u.rows() != current->rows() || u.cols() != current->cols()) {
        throw ShapeError("dropout noise shape does not match layer " + std::to_string(k));
      }
      const double theta = params.dropout_logits[k - 1];
      const double keep_scale = 1.0 / (1.0 - sigmoid(theta));
      Matrix dropped = rec.input;
      auto u_vals = u.values();
      auto m_vals = rec.mask.values();
      auto d_vals = dropped.values();
      for (std::size_t i = 0; i < d_vals.size(); ++i) {
        m_vals[i] = mask_from_logits(theta, logit(u_vals[i]), params.temperature);
        d_vals[i] *= m_vals[i] * keep_scale;
      }
      dense_forward(layer, dropped, rec.pre_activation, rec.activation);
    } else {
      dense_forward(layer, rec.input, rec.pre_activation, rec.activation);
    }
    current = &rec.activation;
  }
  result.output = *current;
  return result;
}

}  // namespace

std::size_t NetworkParameters::input_dim() const {
  return layers.empty() ? 0 : layers.front().fan_in();
}

std::size_t NetworkParameters::output_dim() const {
  return layers.empty() ? 0 : layers.back().fan_out();
}

std::size_t NetworkParameters::parameter_count() const {
  std::size_t n = dropout_logits.size();
  for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

double NetworkParameters::dropout_probability(std::size_t layer) const {
  if (layer == 0 || !has_dropout()) return 0.0;
  return sigmoid(dropout_logits.at(layer - 1));
}

void NetworkParameters::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    if (layer.fan_in() == 0 || layer.fan_out() == 0) {
      throw ShapeError("layer " + std::to_string(k) + " has an empty dimension");
    }
    if (layer.bias.size() != layer.fan_out()) {
      throw ShapeError("layer " + std::to_string(k) + " bias length does not match fan_out");
    }
    if (k > 0 && layers[k - 1].fan_out() != layer.fan_in()) {
      throw ShapeError("layer " + std::to_string(k) + " fan_in does not match previous fan_out");
    }
    if (!layer.weights.all_finite()) {
      throw ValidationError("layer " + std::to_string(k) + " has non-finite weights");
    }
    for (double b : layer.bias) {
      if (!std::isfinite(b)) throw ValidationError("layer " + std::to_string(k) + " has non-finite bias");
    }
  }
  if (has_dropout() && dropout_logits.size() + 1 != layers.size()) {
    throw ShapeError("expected one dropout logit per layer after the first");
  }
  for (double t : dropout_logits) {
    if (!std::isfinite(t)) throw ValidationError("non-finite dropout logit");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("concrete dropout temperature must be positive");
  }
  if (!(l2_scale >= 0.0) || !(dropout_reg_scale >= 0.0)) {
    throw ValidationError("regularization scales must be nonnegative");
  }
}

NetworkParameters make_network(const NetworkConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0 || config.output_dim == 0) {
    throw ShapeError("network input and output dimensions must be positive");
  }
  if (config.concrete_dropout && !(config.initial_dropout > 0.0 && config.initial_dropout < 1.0)) {
    throw ValidationError("initial dropout probability must lie in (0,1)");
  }
  NetworkParameters params;
  params.temperature = config.temperature;
  params.l2_scale = config.l2_scale;
  params.dropout_reg_scale = config.dropout_reg_scale;
  params.seed = seed;

  Rng rng(seed);
  std::vector<std::size_t> dims;
  dims.push_back(config.input_dim);
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.output_dim);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    DenseLayer layer;
    layer.weights = Matrix(dims[k], dims[k + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[k] + dims[k + 1]));
    for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
    layer.bias.assign(dims[k + 1], 0.0);
    layer.activation = k + 2 == dims.size() ? Activation::identity : Activation::relu;
    params.layers.push_back(std::move(layer));
  }
  if (config.concrete_dropout && params.layers.size() > 1) {
    params.dropout_logits.assign(params.layers.size() - 1, logit(config.initial_dropout));
  }
  params.validate();
  return params;
}

DropoutNoise sample_dropout_noise(const NetworkParameters& params, std::size_t batch, Rng& rng) {
  DropoutNoise noise;
  noise.uniforms.resize(params.layers.size());
  if (!params.has_dropout()) return noise;
  for (std::size_t k = 1; k < params.layers.size(); ++k) {
    Matrix u(batch, params.layers[k].fan_in());
    for (double& v : u.values()) v = rng.uniform_open();
    noise.uniforms[k] = std::move(u);
  }
  return noise;
}

ForwardResult forward(const NetworkParameters& params, const Matrix& features, ForwardMode mode,
                      Rng& noise_source) {
  if (mode == ForwardMode::deterministic) return run_forward(params, features, nullptr);
  check_input(params, features);
  const DropoutNoise noise = sample_dropout_noise(params, features.rows(), noise_source);
  return run_forward(params, features, &noise);
}

ForwardResult forward_with_noise(const NetworkParameters& params, const Matrix& features,
                                 const DropoutNoise& noise) {
  if (noise.uniforms.size() != params.layers.size()) {
    throw ShapeError("dropout noise must carry one entry per layer");
  }
  for (const auto& u : noise.uniforms) {
    for (double v : u.values()) {
      if (!(v > 0.0 && v < 1.0)) throw ValidationError("dropout noise must lie in (0,1)");
    }
  }
  return run_forward(params, features, &noise);
}

Matrix predict(const NetworkParameters& params, const Matrix& features) {
  check_input(params, features);
  Matrix current = features;
  Matrix pre;
  Matrix out;
  for (const auto& layer : params.layers) {
    dense_forward(layer, current, pre, out);
    current = std::move(out);
  }
  return current;
}

std::vector<double> predict_row(const NetworkParameters& params, std::span<const double> features) {
  Matrix x(1, features.size(), std::vector<double>(features.begin(), features.end()));
  Matrix y = predict(params, x);
  return {y.values().begin(), y.values().end()};
}

double concrete_mask(double p, double u, double temperature) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("concrete_mask: p must lie in (0,1)");
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("concrete_mask: u must lie in (0,1)");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("concrete_mask: temperature must be positive");
  }
  return 1.0 - sigmoid((std::log(p) - std::log1p(-p) + std::log(u) - std::log1p(-u)) / temperature);
}

ParameterGradients ParameterGradients::zeros_like(const NetworkParameters& params) {
  ParameterGradients g;
  for (const auto& layer : params.layers) {
    g.weights.emplace_back(layer.fan_in(), layer.fan_out());
    g.bias.emplace_back(layer.fan_out(), 0.0);
  }
  g.dropout_logits.assign(params.dropout_logits.size(), 0.0);
  return g;
}

ParameterGradients backward(const NetworkParameters& params, const ForwardTape& tape,
                            const Matrix& features, const Matrix& loss_grad) {
  if (tape.revision != params.revision) {
    throw ContractError("backward: tape was recorded against parameter revision " +
                        std::to_string(tape.revision) + ", current is " +
                        std::to_string(params.revision));
  }
  if (tape.layers.size() != params.layers.size() || tape.batch != features.rows() ||
      tape.layers.front().input != features) {
    throw ContractError("backward: tape does not belong to this forward call");
  }
  if (loss_grad.rows() != tape.batch || loss_grad.cols() != params.output_dim()) {
    throw ShapeError("backward: loss gradient must be batch x output_dim");
  }

  ParameterGradients grads = ParameterGradients::zeros_like(params);
  const bool sampled = tape.mode == ForwardMode::sampled && params.has_dropout();
  Matrix upstream = loss_grad;  // dLoss / d(activation of layer k)
  Matrix dropped;
  Matrix down;
  for (std::size_t idx = params.layers.size(); idx-- > 0;) {
    const DenseLayer& layer = params.layers[idx];
    const LayerTape& rec = tape.layers[idx];

    Matrix d_pre = upstream;
    if (layer.activation == Activation::relu) {
      auto pre = rec.pre_activation.values();
      auto d = d_pre.values();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(pre[i] > 0.0)) d[i] = 0.0;
      }
    }

    const bool has_mask = sampled && idx > 0;
    double keep_scale = 1.0;
    if (has_mask) {
      keep_scale = 1.0 / (1.0 - params.dropout_probability(idx));
      dropped = rec.input;
      auto d = dropped.values();
      auto m = rec.mask.values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= m[i] * keep_scale;
    }
    const Matrix& layer_input = has_mask ? dropped : rec.input;

    matmul_at_b(layer_input, d_pre, grads.weights[idx]);
    for (std::size_t r = 0; r < d_pre.rows(); ++r) {
      auto row = d_pre.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) grads.bias[idx][c] += row[c];
    }
    if (idx == 0) break;

    matmul_a_bt(d_pre, layer.weights, down);  // dLoss / d(dropped input)
    if (has_mask) {
      const double p = params.dropout_probability(idx);
      const double t = params.temperature;
      auto d = down.values();
      auto m = rec.mask.values();
      auto x = rec.input.values();
      double d_theta = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        // d(m * scale)/d(theta) with m = sigmoid(-(theta + logit u)/t), scale = 1/(1-p)
        const double d_mask_scale = keep_scale * (-m[i] * (1.0 - m[i]) / t + m[i] * p);
        d_theta += d[i] * x[i] * d_mask_scale;
        d[i] *= m[i] * keep_scale;
      }
      grads.dropout_logits[idx - 1] = d_theta;
    }
    upstream = std::move(down);
  }
  return grads;
}

double regularization_loss(const NetworkParameters& params) {
  double loss = 0.0;
  for (const auto& layer : params.layers) {
    double sq = 0.0;
    for (double w : layer.weights.values()) sq += w * w;
    loss += params.l2_scale * sq;
  }
  for (std::size_t k = 0; k < params.dropout_logits.size(); ++k) {
    const double p = sigmoid(params.dropout_logits[k]);
    const double d = static_cast<double>(params.layers[k + 1].fan_in());
    loss += params.dropout_reg_scale * d * (p * std::log(p) + (1.0 - p) * std::log1p(-p));
  }
  return loss;
}

ParameterGradients regularization_gradients(const NetworkParameters& params) {
  ParameterGradients g = ParameterGradients::zeros_like(params);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto w = params.layers[k].weights.values();
    auto gw = g.weights[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) gw[i] = 2.0 * params.l2_scale * w[i];
  }
  for (std::size_t k = 0; k < params.dropout_logits.size(); ++k) {
    // d/dtheta [p log p + (1-p) log(1-p)] = theta * p (1-p)
    const double theta = params.dropout_logits[k];
    const double p = sigmoid(theta);
    const double d = static_cast<double>(params.layers[k + 1].fan_in());
    g.dropout_logits[k] = params.dropout_reg_scale * d * theta * p * (1.0 - p);
  }
  return g;
}

void sgd_step(NetworkParameters& params, const ParameterGradients& grads, double learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("sgd_step: learning rate must be finite and nonnegative");
  }
  if (grads.weights.size() != params.layers.size() || grads.bias.size() != params.layers.size() ||
      grads.dropout_logits.size() != params.dropout_logits.size()) {
    throw ShapeError("sgd_step: gradient structure does not match parameters");
  }
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    if (grads.weights[k].rows() != params.layers[k].fan_in() ||
        grads.weights[k].cols() != params.layers[k].fan_out() ||
        grads.bias[k].size() != params.layers[k].fan_out()) {
      throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(k));
    }
    if (!grads.weights[k].all_finite()) {
      throw TrainingError("sgd_step: non-finite weight gradient at layer " + std::to_string(k));
    }
    for (double b : grads.bias[k]) {
      if (!std::isfinite(b)) {
        throw TrainingError("sgd_step: non-finite bias gradient at layer " + std::to_string(k));
      }
    }
  }
  for (std::size_t k = 0; k < grads.dropout_logits.size(); ++k) {
    if (!std::isfinite(grads.dropout_logits[k])) {
      throw TrainingError("sgd_step: non-finite dropout-logit gradient at index " + std::to_string(k));
    }
  }

  const ParameterGradients reg = regularization_gradients(params);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto w = params.layers[k].weights.values();
    auto gw = grads.weights[k].values();
    auto rw = reg.weights[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * (gw[i] + rw[i]);
    auto& b = params.layers[k].bias;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= learning_rate * grads.bias[k][i];
  }
  for (std::size_t k = 0; k < params.dropout_logits.size(); ++k) {
    params.dropout_logits[k] -= learning_rate * (grads.dropout_logits[k] + reg.dropout_logits[k]);
  }
  ++params.revision;
}

}  // namespace aep::nn
