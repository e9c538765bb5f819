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

#include "routekd/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "routekd/errors.hpp"

namespace routekd::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kLogClamp = 1e-12;

double parse_number(std::string_view token, std::string_view notation) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError("bad number '" + std::string(token) + "' in architecture '" +
                     std::string(notation) + "'");
  }
  return value;
}

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void validate_spec(const LayerSpec& spec) {
  std::visit(Overloaded{
                 [](const DenseSpec& d) {
                   if (d.units < 1) throw ValidationError("dense layer needs at least 1 unit");
                 },
                 [](const DropoutSpec& d) {
                   if (!(d.rate >= 0.0 && d.rate < 1.0))
                     throw ValidationError("dropout rate must be in [0, 1)");
                 },
                 [](const auto&) {},
             },
             spec);
}

}  // namespace

Architecture parse_architecture(std::string_view notation, std::size_t output_dim) {
  Architecture arch;
  std::size_t pos = 0;
  while (pos <= notation.size() && !notation.empty()) {
    const std::size_t dash = notation.find('-', pos);
    const std::string_view token =
        notation.substr(pos, dash == std::string_view::npos ? std::string_view::npos : dash - pos);
    if (token.empty()) throw ParseError("empty token in architecture '" + std::string(notation) + "'");

    if (token.ends_with("DP")) {
      arch.push_back(DropoutSpec{parse_number(token.substr(0, token.size() - 2), notation)});
    } else if (token.ends_with("n+BN")) {
      const double units = parse_number(token.substr(0, token.size() - 4), notation);
      arch.push_back(DenseSpec{static_cast<std::size_t>(units)});
      arch.push_back(BatchNormSpec{});
      arch.push_back(ReluSpec{});
    } else if (token.ends_with('n')) {
      const double units = parse_number(token.substr(0, token.size() - 1), notation);
      if (units < 1 || units != std::floor(units))
        throw ParseError("dense width must be a positive integer in '" + std::string(notation) + "'");
      arch.push_back(DenseSpec{static_cast<std::size_t>(units)});
      arch.push_back(ReluSpec{});
    } else {
      throw ParseError("unknown token '" + std::string(token) + "' in architecture '" +
                       std::string(notation) + "'");
    }
    if (dash == std::string_view::npos) break;
    pos = dash + 1;
  }
  arch.push_back(DenseSpec{output_dim});
  for (const auto& spec : arch) validate_spec(spec);
  return arch;
}

std::string format_architecture(const Architecture& arch) {
  std::string out;
  auto append = [&out](const std::string& token) {
    if (!out.empty()) out += '-';
    out += token;
  };
  // The trailing dense layer is the head and is implied by the notation.
  const std::size_t body = arch.empty() ? 0 : arch.size() - 1;
  for (std::size_t i = 0; i < body; ++i) {
    if (const auto* dense = std::get_if<DenseSpec>(&arch[i])) {
      const bool bn = i + 2 < arch.size() && std::holds_alternative<BatchNormSpec>(arch[i + 1]) &&
                      std::holds_alternative<ReluSpec>(arch[i + 2]);
      const bool relu = i + 1 < arch.size() && std::holds_alternative<ReluSpec>(arch[i + 1]);
      if (bn) {
        append(std::to_string(dense->units) + "n+BN");
        i += 2;
      } else if (relu) {
        append(std::to_string(dense->units) + "n");
        i += 1;
      } else {
        throw ValidationError("architecture not expressible in compact notation");
      }
    } else if (const auto* drop = std::get_if<DropoutSpec>(&arch[i])) {
      append(shortest(drop->rate) + "DP");
    } else {
      throw ValidationError("architecture not expressible in compact notation");
    }
  }
  return out;
}

std::string layer_kind(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const DenseSpec&) { return std::string("dense"); },
                        [](const DropoutSpec&) { return std::string("dropout"); },
                        [](const BatchNormSpec&) { return std::string("batchnorm"); },
                        [](const ReluSpec&) { return std::string("relu"); },
                    },
                    spec);
}

Mlp::Mlp(std::size_t input_dim, Architecture architecture, std::uint64_t seed)
    : input_dim_(input_dim),
      architecture_(std::move(architecture)),
      input_shift_(input_dim, 0.0),
      input_scale_(input_dim, 1.0),
      dropout_rng_(derive_seed(seed, "dropout")) {
  if (input_dim_ < 1) throw ValidationError("model input dimension must be >= 1");
  if (architecture_.empty()) throw ValidationError("architecture has no layers");

  std::size_t width = input_dim_;
  for (std::size_t i = 0; i < architecture_.size(); ++i) {
    const LayerSpec& spec = architecture_[i];
    validate_spec(spec);
    std::visit(Overloaded{
                   [&](const DenseSpec& d) {
                     DenseLayer layer;
                     layer.weight = Matrix(width, d.units);
                     layer.bias.assign(d.units, 0.0);
                     Rng rng(derive_seed(seed, i));
                     const double limit = std::sqrt(6.0 / static_cast<double>(width));
                     for (double& w : layer.weight.data()) w = rng.uniform(-limit, limit);
                     layers_.emplace_back(std::move(layer));
                     width = d.units;
                   },
                   [&](const DropoutSpec& d) { layers_.emplace_back(DropoutLayer{d.rate, {}}); },
                   [&](const BatchNormSpec&) {
                     BatchNormLayer layer;
                     layer.gamma.assign(width, 1.0);
                     layer.beta.assign(width, 0.0);
                     layer.running_mean.assign(width, 0.0);
                     layer.running_var.assign(width, 1.0);
                     layers_.emplace_back(std::move(layer));
                   },
                   [&](const ReluSpec&) { layers_.emplace_back(ReluLayer{}); },
               },
               spec);
  }
  output_dim_ = width;
}

Mlp restore_mlp(std::size_t input_dim, Architecture architecture, std::vector<Layer> layers,
                std::vector<double> input_shift, std::vector<double> input_scale) {
  if (architecture.size() != layers.size())
    throw ValidationError("layer count does not match architecture");
  Mlp model;
  model.input_dim_ = input_dim;
  model.architecture_ = std::move(architecture);
  model.layers_ = std::move(layers);
  model.mode_ = Mode::eval;

  std::size_t width = input_dim;
  for (std::size_t i = 0; i < model.layers_.size(); ++i) {
    validate_spec(model.architecture_[i]);
    std::visit(Overloaded{
                   [&](const DenseLayer& l) {
                     const auto* spec = std::get_if<DenseSpec>(&model.architecture_[i]);
                     if (!spec || l.weight.rows() != width || l.weight.cols() != spec->units ||
                         l.bias.size() != spec->units)
                       throw ShapeError("dense layer " + std::to_string(i) + " does not chain");
                     width = spec->units;
                   },
                   [&](const BatchNormLayer& l) {
                     if (!std::holds_alternative<BatchNormSpec>(model.architecture_[i]) ||
                         l.gamma.size() != width || l.beta.size() != width ||
                         l.running_mean.size() != width || l.running_var.size() != width)
                       throw ShapeError("batchnorm layer " + std::to_string(i) + " does not chain");
                   },
                   [&](const DropoutLayer&) {
                     if (!std::holds_alternative<DropoutSpec>(model.architecture_[i]))
                       throw ValidationError("layer " + std::to_string(i) + " kind mismatch");
                   },
                   [&](const ReluLayer&) {
                     if (!std::holds_alternative<ReluSpec>(model.architecture_[i]))
                       throw ValidationError("layer " + std::to_string(i) + " kind mismatch");
                   },
               },
               model.layers_[i]);
  }
  model.output_dim_ = width;
  model.set_input_standardization(std::move(input_shift), std::move(input_scale));
  return model;
}

void Mlp::set_input_standardization(std::vector<double> shift, std::vector<double> scale) {
  if (shift.size() != input_dim_ || scale.size() != input_dim_)
    throw ShapeError("input standardization must have one entry per input feature");
  for (double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("input scale must be positive");
  }
  input_shift_ = std::move(shift);
  input_scale_ = std::move(scale);
}

Matrix Mlp::forward(const Matrix& batch) {
  if (batch.cols() != input_dim_) {
    std::ostringstream os;
    os << "forward: batch has " << batch.cols() << " columns, model expects " << input_dim_;
    throw ShapeError(os.str());
  }
  if (batch.rows() < 1) throw ShapeError("forward: empty batch");
  require_finite(batch, "forward input");

  if (mode_ == Mode::eval) {
    has_cache_ = false;
    return infer(batch);
  }

  const std::size_t n = batch.rows();
  Matrix x = standardize(batch);

  for (Layer& layer : layers_) {
    std::visit(Overloaded{
                   [&](DenseLayer& l) {
                     Matrix out = matmul(x, l.weight);
                     for (std::size_t r = 0; r < n; ++r) {
                       auto row = out.row(r);
                       for (std::size_t c = 0; c < row.size(); ++c) row[c] += l.bias[c];
                     }
                     l.cached_input = std::move(x);
                     x = std::move(out);
                   },
                   [&](DropoutLayer& l) {
                     if (l.rate == 0.0) {
                       l.mask = Matrix(x.rows(), x.cols(), 1.0);
                       return;
                     }
                     const double keep_scale = 1.0 / (1.0 - l.rate);
                     l.mask = Matrix(x.rows(), x.cols());
                     auto& mask = l.mask.data();
                     auto& xs = x.data();
                     for (std::size_t i = 0; i < xs.size(); ++i) {
                       mask[i] = dropout_rng_.uniform() >= l.rate ? keep_scale : 0.0;
                       xs[i] *= mask[i];
                     }
                   },
                   [&](BatchNormLayer& l) {
                     const std::size_t d = x.cols();
                     {
                       std::vector<double> mean(d, 0.0), var(d, 0.0);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
                       for (double& m : mean) m /= static_cast<double>(n);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < d; ++c) {
                           const double dev = x(r, c) - mean[c];
                           var[c] += dev * dev;
                         }
                       for (double& v : var) v /= static_cast<double>(n);

                       l.cached_inv_std.resize(d);
                       for (std::size_t c = 0; c < d; ++c) {
                         l.cached_inv_std[c] = 1.0 / std::sqrt(var[c] + l.epsilon);
                         l.running_mean[c] = l.momentum * l.running_mean[c] + (1.0 - l.momentum) * mean[c];
                         l.running_var[c] = l.momentum * l.running_var[c] + (1.0 - l.momentum) * var[c];
                       }
                       l.cached_normalized = Matrix(n, d);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t c = 0; c < d; ++c) {
                           const double xhat = (x(r, c) - mean[c]) * l.cached_inv_std[c];
                           l.cached_normalized(r, c) = xhat;
                           x(r, c) = l.gamma[c] * xhat + l.beta[c];
                         }
                     }
                   },
                   [&](ReluLayer& l) {
                     l.cached_input = x;
                     for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
                   },
               },
               layer);
  }
  if (!x.all_finite()) throw ValidationError("forward produced non-finite logits");
  has_cache_ = true;
  cached_rows_ = n;
  return x;
}

Matrix Mlp::standardize(const Matrix& batch) const {
  Matrix x = batch;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < input_dim_; ++c) x(r, c) = (x(r, c) - input_shift_[c]) / input_scale_[c];
  }
  return x;
}

Matrix Mlp::infer(const Matrix& batch) const {
  if (batch.cols() != input_dim_) {
    std::ostringstream os;
    os << "infer: batch has " << batch.cols() << " columns, model expects " << input_dim_;
    throw ShapeError(os.str());
  }
  if (batch.rows() < 1) throw ShapeError("infer: empty batch");
  require_finite(batch, "inference input");

  Matrix x = standardize(batch);
  for (const Layer& layer : layers_) {
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      Matrix out = matmul(x, dense->weight);
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += dense->bias[c];
      }
      x = std::move(out);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
          const double xhat =
              (x(r, c) - bn->running_mean[c]) / std::sqrt(bn->running_var[c] + bn->epsilon);
          x(r, c) = bn->gamma[c] * xhat + bn->beta[c];
        }
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
    }
    // Dropout is the identity at inference.
  }
  if (!x.all_finite()) throw ValidationError("inference produced non-finite logits");
  return x;
}

Gradients Mlp::backward(const Matrix& upstream_gradient) {
  if (!has_cache_) throw UsageError("backward() requires a preceding train-mode forward()");
  Gradients grads(layers_.size());
  Matrix g = upstream_gradient;

  require_shape(g, cached_rows_, output_dim_, "backward upstream gradient");

  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    std::visit(Overloaded{
                   [&](DenseLayer& l) {
                     Matrix dw = matmul_at_b(l.cached_input, g);
                     std::vector<double> db(l.bias.size(), 0.0);
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       auto row = g.row(r);
                       for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
                     }
                     if (idx > 0) g = matmul_a_bt(g, l.weight);
                     grads[idx].weight = std::move(dw.data());
                     grads[idx].bias = std::move(db);
                   },
                   [&](DropoutLayer& l) {
                     auto& gs = g.data();
                     const auto& mask = l.mask.data();
                     for (std::size_t i = 0; i < gs.size(); ++i) gs[i] *= mask[i];
                   },
                   [&](BatchNormLayer& l) {
                     const std::size_t n = g.rows();
                     const std::size_t d = g.cols();
                     const Matrix& xhat = l.cached_normalized;
                     std::vector<double> dgamma(d, 0.0), dbeta(d, 0.0);
                     std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
                     for (std::size_t r = 0; r < n; ++r)
                       for (std::size_t c = 0; c < d; ++c) {
                         const double dy = g(r, c);
                         dgamma[c] += dy * xhat(r, c);
                         dbeta[c] += dy;
                         const double dxh = dy * l.gamma[c];
                         sum_dxhat[c] += dxh;
                         sum_dxhat_xhat[c] += dxh * xhat(r, c);
                       }
                     const double nn = static_cast<double>(n);
                     for (std::size_t r = 0; r < n; ++r)
                       for (std::size_t c = 0; c < d; ++c) {
                         const double dxh = g(r, c) * l.gamma[c];
                         g(r, c) = l.cached_inv_std[c] / nn *
                                   (nn * dxh - sum_dxhat[c] - xhat(r, c) * sum_dxhat_xhat[c]);
                       }
                     grads[idx].weight = std::move(dgamma);
                     grads[idx].bias = std::move(dbeta);
                   },
                   [&](ReluLayer& l) {
                     auto& gs = g.data();
                     const auto& in = l.cached_input.data();
                     for (std::size_t i = 0; i < gs.size(); ++i)
                       if (!(in[i] > 0.0)) gs[i] = 0.0;
                   },
               },
               layers_[idx]);
  }
  has_cache_ = false;
  return grads;
}

std::vector<std::span<double>> Mlp::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (Layer& layer : layers_) {
    if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      blocks.emplace_back(dense->weight.data());
      blocks.emplace_back(dense->bias);
    } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      blocks.emplace_back(bn->gamma);
      blocks.emplace_back(bn->beta);
    }
  }
  return blocks;
}

std::vector<double> Mlp::flatten_state() const {
  std::vector<double> out;
  auto append = [&out](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
  for (const Layer& layer : layers_) {
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      append(dense->weight.data());
      append(dense->bias);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      append(bn->gamma);
      append(bn->beta);
      append(bn->running_mean);
      append(bn->running_var);
    }
  }
  append(input_shift_);
  append(input_scale_);
  return out;
}

Gradients Mlp::zero_gradients() const {
  Gradients grads(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* dense = std::get_if<DenseLayer>(&layers_[i])) {
      grads[i].weight.assign(dense->weight.size(), 0.0);
      grads[i].bias.assign(dense->bias.size(), 0.0);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layers_[i])) {
      grads[i].weight.assign(bn->gamma.size(), 0.0);
      grads[i].bias.assign(bn->beta.size(), 0.0);
    }
  }
  return grads;
}

Matrix softmax(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ValidationError("softmax temperature must be a positive finite number");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto dst = out.row(r);
    if (in.empty()) continue;
    const double max_logit = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp((in[c] - max_logit) / temperature);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

double cross_entropy(const Matrix& probabilities, const Matrix& targets) {
  require_shape(targets, probabilities.rows(), probabilities.cols(), "cross_entropy targets");
  if (probabilities.rows() == 0) throw ShapeError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < probabilities.rows(); ++r) {
    auto p = probabilities.row(r);
    auto t = targets.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (t[c] == 0.0) continue;
      total -= t[c] * std::log(std::clamp(p[c], kLogClamp, 1.0));
    }
  }
  return total / static_cast<double>(probabilities.rows());
}

Matrix softmax_cross_entropy_gradient(const Matrix& logits, const Matrix& targets,
                                      double temperature) {
  require_shape(targets, logits.rows(), logits.cols(), "softmax_cross_entropy_gradient targets");
  Matrix grad = softmax(logits, temperature);
  const double scale = 1.0 / (temperature * static_cast<double>(logits.rows()));
  auto& g = grad.data();
  const auto& t = targets.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - t[i]) * scale;
  return grad;
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix out(labels.size(), classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes)
      throw ValidationError("label " + std::to_string(labels[r]) + " out of range");
    out(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

void sgd_step(Mlp& model, const Gradients& gradients, SgdState& state) {
  if (!(state.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(state.momentum >= 0.0 && state.momentum < 1.0))
    throw ValidationError("momentum must be in [0, 1)");
  if (gradients.size() != model.layers().size())
    throw ShapeError("gradient layer count does not match model");

  const Gradients expected = model.zero_gradients();
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    if (gradients[i].weight.size() != expected[i].weight.size() ||
        gradients[i].bias.size() != expected[i].bias.size())
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(i));
  }
  const bool use_momentum = state.momentum > 0.0;
  if (use_momentum && state.velocity.size() != gradients.size()) state.velocity = expected;

  auto update = [&](std::span<double> params, const std::vector<double>& grad,
                    std::vector<double>* velocity) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      double step = grad[k];
      if (velocity) {
        (*velocity)[k] = state.momentum * (*velocity)[k] + grad[k];
        step = (*velocity)[k];
      }
      params[k] -= state.learning_rate * step;
    }
  };

  auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::vector<double>* vw = use_momentum ? &state.velocity[i].weight : nullptr;
    std::vector<double>* vb = use_momentum ? &state.velocity[i].bias : nullptr;
    if (auto* dense = std::get_if<DenseLayer>(&layers[i])) {
      update(dense->weight.data(), gradients[i].weight, vw);
      update(dense->bias, gradients[i].bias, vb);
    } else if (auto* bn = std::get_if<BatchNormLayer>(&layers[i])) {
      update(bn->gamma, gradients[i].weight, vw);
      update(bn->beta, gradients[i].bias, vb);
    }
  }
}

}  // namespace routekd::nn
