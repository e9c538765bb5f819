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

#include "routekd/distill.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "routekd/errors.hpp"
#include "routekd/evaluation.hpp"
#include "routekd/io_util.hpp"
#include "routekd/random.hpp"
#include "routekd/route_data.hpp"

namespace routekd::distill {

void DistillationConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ValidationError("alpha and beta must be nonnegative");
  if (!(alpha + beta > 0.0)) throw ValidationError("alpha + beta must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ValidationError("temperature must be positive");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
}

DistillationLoss distillation_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                                   std::span<const int> labels, double alpha, double beta,
                                   double temperature) {
  require_shape(teacher_logits, student_logits.rows(), student_logits.cols(), "teacher logits");
  if (labels.size() != student_logits.rows())
    throw ShapeError("label count " + std::to_string(labels.size()) + " != batch rows " +
                     std::to_string(student_logits.rows()));
  const Matrix targets = nn::one_hot(labels, student_logits.cols());
  const Matrix soft_targets = nn::softmax(teacher_logits, temperature);

  DistillationLoss out;
  out.hard = nn::cross_entropy(nn::softmax(student_logits, 1.0), targets);
  out.soft = nn::cross_entropy(nn::softmax(student_logits, temperature), soft_targets);
  out.total = alpha * out.hard + beta * out.soft;

  out.gradient = nn::softmax_cross_entropy_gradient(student_logits, targets, 1.0);
  const Matrix soft_grad = nn::softmax_cross_entropy_gradient(student_logits, soft_targets, temperature);
  auto& g = out.gradient.data();
  const auto& sg = soft_grad.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = alpha * g[i] + beta * sg[i];
  return out;
}

namespace {

void require_io_dims(const nn::Mlp& model, const char* what) {
  if (model.input_dim() != kNumFeatures || model.output_dim() != kNumExits) {
    std::ostringstream os;
    os << what << " must map " << kNumFeatures << " features to " << kNumExits << " exits, got "
       << model.input_dim() << " -> " << model.output_dim();
    throw ValidationError(os.str());
  }
}

// One loop for teacher pretraining, distillation and the standalone
// student. `teacher` may be null only when beta == 0.
TrainingResult run_training(const nn::Architecture& architecture, const Dataset& train,
                            const Dataset* test, const DistillationConfig& config,
                            const nn::Mlp* teacher) {
  config.validate();
  if (train.empty()) throw ValidationError("training split is empty");
  if (test && test->empty()) throw ValidationError("test split is empty");

  nn::Mlp model(kNumFeatures, architecture, derive_seed(config.seed, "init"));
  require_io_dims(model, "architecture");
  const auto scaler = route::TravelTimeScaler::fit(train);
  model.set_input_standardization(scaler.shift(), scaler.scale());
  model.set_mode(nn::Mode::train);

  std::optional<nn::Mlp> frozen_teacher;
  if (teacher) {
    require_io_dims(*teacher, "teacher");
    if (teacher->mode() != nn::Mode::eval) throw ValidationError("teacher must be in eval mode");
    // With beta = 0 the soft term has no weight; skip it so the run is the
    // standalone one.
    if (config.beta != 0.0) frozen_teacher = *teacher;
  } else if (config.beta != 0.0) {
    throw ValidationError("beta > 0 requires a teacher");
  }

  nn::SgdState sgd{config.learning_rate, config.momentum, {}};
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainingResult result;
  result.best_accuracy = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double hard_sum = 0.0, soft_sum = 0.0, total_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix batch = train.features.gather_rows(idx);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.labels[idx[i]];

      const Matrix student_logits = model.forward(batch);
      const Matrix teacher_logits =
          frozen_teacher ? frozen_teacher->infer(batch) : Matrix(idx.size(), kNumExits, 0.0);
      const DistillationLoss loss = distillation_loss(student_logits, teacher_logits, labels, config.alpha,
                                                      config.beta, config.temperature);
      const nn::Gradients grads = model.backward(loss.gradient);
      nn::sgd_step(model, grads, sgd);

      const double w = static_cast<double>(idx.size());
      hard_sum += w * loss.hard;
      soft_sum += w * (frozen_teacher ? loss.soft : 0.0);
      total_sum += w * loss.total;
    }

    model.set_mode(nn::Mode::eval);
    EpochStats stats;
    stats.epoch = epoch;
    const double n = static_cast<double>(train.size());
    stats.hard_loss = hard_sum / n;
    stats.soft_loss = soft_sum / n;
    stats.total_loss = total_sum / n;
    stats.train_accuracy = eval::accuracy(model, train);
    stats.test_accuracy = test ? eval::accuracy(model, *test) : std::numeric_limits<double>::quiet_NaN();
    result.trace.epochs.push_back(stats);

    const double score = test ? stats.test_accuracy : stats.train_accuracy;
    if (score > result.best_accuracy) {
      result.best_accuracy = score;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    model.set_mode(nn::Mode::train);
  }
  model.set_mode(nn::Mode::eval);
  result.model = std::move(model);
  result.best_model.set_mode(nn::Mode::eval);
  return result;
}

}  // namespace

TrainingResult pretrain_teacher(const nn::Architecture& architecture, const Dataset& train,
                                const Dataset* test, const DistillationConfig& config) {
  DistillationConfig hard_only = config;
  hard_only.alpha = 1.0;
  hard_only.beta = 0.0;
  return run_training(architecture, train, test, hard_only, nullptr);
}

TrainingResult distill(const nn::Mlp& teacher, const nn::Architecture& student_architecture,
                       const Dataset& train, const Dataset& test, const DistillationConfig& config) {
  return run_training(student_architecture, train, &test, config, &teacher);
}

TrainingResult train_standalone(const nn::Architecture& student_architecture, const Dataset& train,
                                const Dataset& test, const DistillationConfig& config) {
  DistillationConfig no_teacher = config;
  no_teacher.beta = 0.0;
  return run_training(student_architecture, train, &test, no_teacher, nullptr);
}

std::string trace_to_csv(const TrainingTrace& trace) {
  std::string out = "epoch,hard_loss,soft_loss,total_loss,train_acc,test_acc\n";
  for (const EpochStats& e : trace.epochs) {
    out += std::to_string(e.epoch) + ',' + format_double(e.hard_loss) + ',' + format_double(e.soft_loss) + ',' +
           format_double(e.total_loss) + ',' + format_double(e.train_accuracy) + ',' +
           format_double(e.test_accuracy) + '\n';
  }
  return out;
}

TrainingTrace trace_from_csv(std::string_view text) {
  TrainingTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "epoch,hard_loss,soft_loss,total_loss,train_acc,test_acc")
        throw ParseError("trace: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double x = 0.0;
      if (!parse_double(cell, x)) throw ParseError("trace line " + std::to_string(line_no) + ": bad number");
      v.push_back(x);
    }
    if (v.size() != 6) throw ParseError("trace line " + std::to_string(line_no) + ": expected 6 fields");
    trace.epochs.push_back({static_cast<std::size_t>(v[0]), v[1], v[2], v[3], v[4], v[5]});
  }
  if (line_no == 0) throw ParseError("trace: empty document");
  return trace;
}

}  // namespace routekd::distill
