// Copyright 2026 The routekd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal feedforward network engine: dense, dropout, batch-norm and ReLU
// layers with exact backpropagation and plain/momentum SGD.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "routekd/matrix.hpp"
#include "routekd/random.hpp"

namespace routekd::nn {

enum class Mode { train, eval };

struct DenseSpec {
  std::size_t units = 0;
  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};
struct DropoutSpec {
  double rate = 0.0;
  friend bool operator==(const DropoutSpec&, const DropoutSpec&) = default;
};
struct BatchNormSpec {
  friend bool operator==(const BatchNormSpec&, const BatchNormSpec&) = default;
};
struct ReluSpec {
  friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};

using LayerSpec = std::variant<DenseSpec, DropoutSpec, BatchNormSpec, ReluSpec>;
using Architecture = std::vector<LayerSpec>;

/// Parses the compact notation used for network descriptions, e.g.
/// "10n-0.25DP-30n". `<N>n` is a dense layer of N units followed by ReLU,
/// `<N>n+BN` inserts batch normalization between the dense layer and its
/// ReLU, and `<p>DP` is dropout with rate p. A dense head of `output_dim`
/// units is appended.
Architecture parse_architecture(std::string_view notation, std::size_t output_dim = 4);

/// Inverse of parse_architecture for architectures it can express.
std::string format_architecture(const Architecture& arch);

std::string layer_kind(const LayerSpec& spec);

struct DenseLayer {
  Matrix weight;  // in x out
  std::vector<double> bias;
  Matrix cached_input;
};

struct DropoutLayer {
  double rate = 0.0;
  Matrix mask;  // already holds the 1/(1-rate) scale
};

struct BatchNormLayer {
  static constexpr double kDefaultEpsilon = 1e-5;
  static constexpr double kDefaultMomentum = 0.9;

  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = kDefaultEpsilon;
  double momentum = kDefaultMomentum;
  Matrix cached_normalized;
  std::vector<double> cached_inv_std;
};

struct ReluLayer {
  Matrix cached_input;
};

using Layer = std::variant<DenseLayer, DropoutLayer, BatchNormLayer, ReluLayer>;

/// Gradient of one layer's trainable parameters. Dense: weight (row-major,
/// in x out) and bias. Batch norm: gamma in `weight`, beta in `bias`.
/// Parameter-free layers have both empty.
struct LayerGradient {
  std::vector<double> weight;
  std::vector<double> bias;
};
using Gradients = std::vector<LayerGradient>;

class Mlp {
 public:
  Mlp() = default;

  /// Builds and initializes a network. Dense weights are drawn uniformly
  /// from +-sqrt(6 / fan_in) with a per-layer seed; biases start at zero.
  Mlp(std::size_t input_dim, Architecture architecture, std::uint64_t seed);

  /// Logits for `batch` (rows = records). In train mode the activations
  /// needed by backward() are cached.
  Matrix forward(const Matrix& batch);

  /// Eval-mode logits without touching any cached state. forward() in eval
  /// mode delegates here.
  Matrix infer(const Matrix& batch) const;

  /// Backpropagates d(loss)/d(logits) through the cached train-mode pass.
  Gradients backward(const Matrix& upstream_gradient);

  void set_mode(Mode mode) noexcept { mode_ = mode; }
  Mode mode() const noexcept { return mode_; }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  const Architecture& architecture() const noexcept { return architecture_; }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Resets the generator behind dropout masks.
  void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

  /// Inputs are mapped to (x - shift) / scale before the first layer.
  /// Defaults are shift 0, scale 1.
  void set_input_standardization(std::vector<double> shift, std::vector<double> scale);
  const std::vector<double>& input_shift() const noexcept { return input_shift_; }
  const std::vector<double>& input_scale() const noexcept { return input_scale_; }

  /// Mutable views of every trainable parameter block, in the order
  /// (layer 0 weight, layer 0 bias, layer 1 weight, ...), skipping
  /// parameter-free layers. Matches the layout of Gradients.
  std::vector<std::span<double>> parameter_blocks();

  /// All trainable parameters and running statistics, concatenated.
  std::vector<double> flatten_state() const;

  Gradients zero_gradients() const;

  bool has_cached_forward() const noexcept { return has_cache_; }

 private:
  Matrix standardize(const Matrix& batch) const;

  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  Architecture architecture_;
  std::vector<Layer> layers_;
  std::vector<double> input_shift_;
  std::vector<double> input_scale_;
  Mode mode_ = Mode::train;
  Rng dropout_rng_;
  bool has_cache_ = false;
  std::size_t cached_rows_ = 0;

  friend Mlp restore_mlp(std::size_t, Architecture, std::vector<Layer>,
                         std::vector<double>, std::vector<double>);
};

/// Assembles a model from already-populated layers (used by deserialization).
Mlp restore_mlp(std::size_t input_dim, Architecture architecture, std::vector<Layer> layers,
                std::vector<double> input_shift, std::vector<double> input_scale);

/// Row-wise softmax of logits / temperature, computed with max subtraction.
Matrix softmax(const Matrix& logits, double temperature = 1.0);

/// Mean over rows of -sum_k target_k * log(p_k); log arguments are clamped to
/// [1e-12, 1]. Targets may be one-hot or any distribution.
double cross_entropy(const Matrix& probabilities, const Matrix& targets);

/// Gradient of cross_entropy(softmax(logits, T), targets) with respect to
/// the logits: (softmax(logits, T) - targets) / (T * rows).
Matrix softmax_cross_entropy_gradient(const Matrix& logits, const Matrix& targets,
                                      double temperature = 1.0);

Matrix one_hot(std::span<const int> labels, std::size_t classes);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

struct SgdState {
  double learning_rate = 0.01;
  double momentum = 0.0;
  Gradients velocity;  // lazily sized on the first step
};

/// p <- p - lr * v with v <- momentum * v + g (v = g when momentum is 0).
void sgd_step(Mlp& model, const Gradients& gradients, SgdState& state);

}  // namespace routekd::nn
