#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aep/matrix.hpp"
#include "aep/random.hpp"

namespace aep::nn {

enum class Activation { relu, identity };

/// y = activation(x * weights + bias); weights are fan_in x fan_out.
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;
  Activation activation = Activation::relu;

  std::size_t fan_in() const noexcept { return weights.rows(); }
  std::size_t fan_out() const noexcept { return weights.cols(); }
};

struct NetworkConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t output_dim = 2;
  /// Concrete dropout on the input of every layer after the first.
  bool concrete_dropout = true;
  double initial_dropout = 0.1;
  double temperature = 0.1;
  double l2_scale = 1e-6;
  double dropout_reg_scale = 1e-5;
};

/// Weights, biases and learnable dropout logits of a feed-forward network.
///
/// dropout_logits is either empty (no dropout) or holds one logit per layer
/// after the first; logit k controls the dropout applied to the input of
/// layer k + 1. Dropout probabilities are sigmoid(logit) and so always lie
/// strictly inside (0, 1).
struct NetworkParameters {
  std::vector<DenseLayer> layers;
  std::vector<double> dropout_logits;
  double temperature = 0.1;
  double l2_scale = 0.0;
  double dropout_reg_scale = 0.0;
  std::uint64_t seed = 0;
  /// Bumped by every optimizer step; tapes from older revisions are stale.
  std::uint64_t revision = 0;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  bool has_dropout() const noexcept { return !dropout_logits.empty(); }
  /// Dropout probability applied to the input of `layer` (0 for layer 0 or
  /// when dropout is disabled).
  double dropout_probability(std::size_t layer) const;

  /// Throws ShapeError / ValidationError if the invariants do not hold.
  void validate() const;
};

NetworkParameters make_network(const NetworkConfig& config, std::uint64_t seed);

enum class ForwardMode { sampled, deterministic };

/// Uniform(0,1) draws feeding the concrete relaxation, one matrix per layer
/// (batch x fan_in). Matrices for layers without dropout are empty.
struct DropoutNoise {
  std::vector<Matrix> uniforms;
};

DropoutNoise sample_dropout_noise(const NetworkParameters& params, std::size_t batch, Rng& rng);

struct LayerTape {
  Matrix input;           // layer input before dropout
  Matrix mask;            // concrete keep-mask, 1.0 everywhere when not sampled
  Matrix pre_activation;  // after dropout, weights and bias
  Matrix activation;
};

struct ForwardTape {
  std::vector<LayerTape> layers;
  ForwardMode mode = ForwardMode::deterministic;
  std::uint64_t revision = 0;
  std::size_t batch = 0;
};

struct ForwardResult {
  Matrix output;  // batch x output_dim
  ForwardTape tape;
};

ForwardResult forward(const NetworkParameters& params, const Matrix& features, ForwardMode mode,
                      Rng& noise_source);

/// Sampled-mode forward pass with caller supplied noise (used to freeze the
/// masks, e.g. for finite-difference checks).
ForwardResult forward_with_noise(const NetworkParameters& params, const Matrix& features,
                                 const DropoutNoise& noise);

/// Deterministic forward pass without recording a tape.
Matrix predict(const NetworkParameters& params, const Matrix& features);
std::vector<double> predict_row(const NetworkParameters& params, std::span<const double> features);

/// Concrete relaxation of a Bernoulli keep-mask:
///   z = 1 - sigmoid((log p - log(1-p) + log u - log(1-u)) / temperature)
double concrete_mask(double p, double u, double temperature);

struct ParameterGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;
  std::vector<double> dropout_logits;

  static ParameterGradients zeros_like(const NetworkParameters& params);
};

/// Gradients of the data loss given dLoss/dOutput (batch x output_dim). The
/// dropout noise recorded on the tape is held fixed, so gradients reach the
/// dropout logits through the sampled masks.
ParameterGradients backward(const NetworkParameters& params, const ForwardTape& tape,
                            const Matrix& features, const Matrix& loss_grad);

/// l2_scale * sum ||W||^2 + dropout_reg_scale * sum_k d_k (p log p + (1-p) log(1-p))
double regularization_loss(const NetworkParameters& params);

/// Gradients of regularization_loss.
ParameterGradients regularization_gradients(const NetworkParameters& params);

/// params <- params - learning_rate * (grads + regularization gradients).
void sgd_step(NetworkParameters& params, const ParameterGradients& grads, double learning_rate);

}  // namespace aep::nn
