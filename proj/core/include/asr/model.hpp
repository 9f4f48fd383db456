#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "asr/matrix.hpp"

namespace asr::model {

struct ModelConfig {
  int n_input = 26;
  int n_hidden = 128;
  int n_output = 29;
  double relu_clip = 20.0;
  // Inverted dropout on the four dense hidden layers; training only.
  double dropout = 0.0;
  std::uint64_t seed = 0;

  // Throws Error{InvalidConfig}.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Three clipped-ReLU dense layers, one unidirectional LSTM, one clipped-ReLU
// dense layer and a softmax output layer. Biases are n x 1 matrices. LSTM gate
// blocks are stacked in the order input, forget, cell, output.
struct ModelParams {
  static constexpr std::size_t kTensorCount = 13;

  Matrix dense1_w, dense1_b;
  Matrix dense2_w, dense2_b;
  Matrix dense3_w, dense3_b;
  Matrix lstm_wx, lstm_wh, lstm_b;
  Matrix dense5_w, dense5_b;
  Matrix output_w, output_b;

  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;
  static const std::array<std::string_view, kTensorCount>& tensor_names();

  std::size_t parameter_count() const;
  bool operator==(const ModelParams&) const = default;
};

// Zero tensors with the shapes implied by cfg.
ModelParams zeros(const ModelConfig& cfg);
// Glorot-uniform weights, zero biases, forget-gate bias 1.0.
ModelParams init_model(const ModelConfig& cfg);
std::size_t expected_parameter_count(const ModelConfig& cfg);
// Throws Error{ShapeMismatch} when params do not match cfg.
void check_shapes(const ModelParams& params, const ModelConfig& cfg);

struct DropoutKey {
  double rate = 0.0;
  std::uint64_t key = 0;
};

// Intermediates kept for the backward pass (rows = frames).
struct ForwardCache {
  Matrix input;
  Matrix z1, h1, z2, h2, z3, h3;
  Matrix gate_i, gate_f, gate_g, gate_o;
  Matrix cell, cell_tanh, lstm_h;
  Matrix z5, h5;
  // Per-unit dropout scale (0 or 1/(1-p)); empty when dropout is off.
  Matrix mask1, mask2, mask3, mask5;
};

struct ForwardResult {
  Matrix logits;
  Matrix probs;
  Matrix log_probs;
  ForwardCache cache;
};

// Throws Error{ShapeMismatch} if feats.cols != cfg.n_input.
ForwardResult forward(const ModelParams& params, const ModelConfig& cfg, const Matrix& feats,
                      std::optional<DropoutKey> dropout = std::nullopt);

// Reverse-mode gradients of a scalar loss given dLoss/dLogits (T x n_output),
// including backpropagation through time across the LSTM scan.
ModelParams backward(const ModelParams& params, const ModelConfig& cfg, const ForwardCache& cache,
                     const Matrix& grad_logits);

// Row-wise log-softmax and softmax.
Matrix log_softmax(const Matrix& logits);

}  // namespace asr::model
