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

// Test-only reference computations. Everything here is written
// independently of the library code paths it is compared against: plain
// loops in long double, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "routekd/gmm.hpp"
#include "routekd/matrix.hpp"
#include "routekd/nn.hpp"
#include "routekd/random.hpp"

namespace routekd::testing {

using LongRow = std::vector<long double>;

inline LongRow softmax_row(std::span<const double> z, long double temperature = 1.0L) {
  LongRow out(z.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(static_cast<long double>(z[i]) / temperature);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

/// Mean over rows of -log softmax(z)[label].
inline long double hard_loss(const Matrix& logits, std::span<const int> labels) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const LongRow p = softmax_row(logits.row(r));
    total -= std::log(p[static_cast<std::size_t>(labels[r])]);
  }
  return total / static_cast<long double>(logits.rows());
}

/// Mean over rows of -sum_k softmax(t/T)_k log softmax(s/T)_k.
inline long double soft_loss(const Matrix& student, const Matrix& teacher, long double temperature) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < student.rows(); ++r) {
    const LongRow p = softmax_row(student.row(r), temperature);
    const LongRow q = softmax_row(teacher.row(r), temperature);
    for (std::size_t k = 0; k < p.size(); ++k) total -= q[k] * std::log(p[k]);
  }
  return total / static_cast<long double>(student.rows());
}

/// Direct sum of weighted diagonal Gaussian densities, mean log over rows.
inline long double gmm_log_likelihood(const gmm::GmmModel& model, const Matrix& data) {
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  long double total = 0.0L;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    long double density = 0.0L;
    for (std::size_t j = 0; j < model.k(); ++j) {
      long double comp = model.weights[j];
      for (std::size_t c = 0; c < data.cols(); ++c) {
        const long double var = model.variances[j][c];
        const long double dev = data(r, c) - model.means[j][c];
        comp *= std::exp(-dev * dev / (2.0L * var)) / std::sqrt(two_pi * var);
      }
      density += comp;
    }
    total += std::log(density);
  }
  return total / static_cast<long double>(data.rows());
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.below(classes));
  return labels;
}

/// Small random network with up to three hidden dense layers of at most 20
/// units; each hidden layer may carry batch norm and dropout.
inline nn::Architecture random_architecture(Rng& rng, std::size_t output_dim) {
  nn::Architecture arch;
  const int hidden = rng.between(1, 3);
  for (int i = 0; i < hidden; ++i) {
    arch.push_back(nn::DenseSpec{static_cast<std::size_t>(rng.between(2, 20))});
    if (rng.uniform() < 0.5) arch.push_back(nn::BatchNormSpec{});
    arch.push_back(nn::ReluSpec{});
    if (rng.uniform() < 0.5) arch.push_back(nn::DropoutSpec{rng.uniform(0.1, 0.5)});
  }
  arch.push_back(nn::DenseSpec{output_dim});
  return arch;
}

/// Dense biases start at zero, which puts ReLU inputs exactly on the kink
/// whenever dropout clears a whole row. Central differences are meaningless
/// there, so gradient checks draw the biases first.
inline void randomize_biases(nn::Mlp& model, Rng& rng) {
  for (auto& layer : model.layers())
    if (auto* dense = std::get_if<nn::DenseLayer>(&layer))
      for (double& b : dense->bias) b = rng.uniform(-0.5, 0.5);
}

/// Loss of a logits matrix (the oracle side of a gradient check).
using LossFn = std::function<long double(const Matrix&)>;
/// d loss / d logits from the implementation under test.
using LogitGradFn = std::function<Matrix(const Matrix&)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Compares backward() against central differences of `loss` over every
/// trainable parameter. The dropout generator is reseeded before every
/// forward so each evaluation sees the same mask. Relative error is
/// |a - n| / max(|a|, |n|, 1e-6); the floor keeps gradients that are zero
/// up to rounding from dominating.
inline GradientCheck check_gradients(nn::Mlp& model, const Matrix& batch, const LossFn& loss,
                                     const LogitGradFn& grad, double h = 1e-5) {
  constexpr std::uint64_t kMaskSeed = 7;
  model.set_mode(nn::Mode::train);
  model.reseed_dropout(kMaskSeed);
  const Matrix logits = model.forward(batch);
  const nn::Gradients analytic = model.backward(grad(logits));

  std::vector<const std::vector<double>*> flat_grads;
  for (const auto& g : analytic) {
    if (g.weight.empty() && g.bias.empty()) continue;
    flat_grads.push_back(&g.weight);
    flat_grads.push_back(&g.bias);
  }
  auto blocks = model.parameter_blocks();

  auto eval = [&] {
    model.reseed_dropout(kMaskSeed);
    return loss(model.forward(batch));
  };

  GradientCheck out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double saved = blocks[b][i];
      blocks[b][i] = saved + h;
      const long double up = eval();
      blocks[b][i] = saved - h;
      const long double down = eval();
      blocks[b][i] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * h));
      const double a = (*flat_grads[b])[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(a - numeric) / denom);
      ++out.parameters;
    }
  }
  return out;
}

}  // namespace routekd::testing
