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

// Teacher pretraining and teacher-to-student knowledge distillation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "routekd/nn.hpp"
#include "routekd/records.hpp"

namespace routekd::distill {

struct DistillationConfig {
  double alpha = 0.5;        // weight of the hard-label term
  double beta = 0.5;         // weight of the softened teacher term
  double temperature = 2.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::uint64_t seed = 0;

  /// Throws ValidationError on alpha/beta < 0, alpha + beta == 0,
  /// temperature <= 0, epochs or batch size of 0, or a bad learning rate.
  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double hard_loss = 0.0;
  double soft_loss = 0.0;
  double total_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // NaN when no test split was given
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
};

/// `epoch,hard_loss,soft_loss,total_loss,train_acc,test_acc`
std::string trace_to_csv(const TrainingTrace& trace);
TrainingTrace trace_from_csv(std::string_view text);

struct TrainingResult {
  nn::Mlp model;       // after the last epoch, eval mode
  nn::Mlp best_model;  // highest test accuracy (train accuracy without a test split)
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;
  TrainingTrace trace;
};

struct DistillationLoss {
  double total = 0.0;
  double hard = 0.0;  // CE(softmax(student), one_hot(labels))
  double soft = 0.0;  // CE(softmax(student, T), softmax(teacher, T))
  Matrix gradient;    // d total / d student logits
};

/// alpha * hard + beta * soft, both averaged over the batch. The teacher
/// logits are constants: no gradient is produced for them.
DistillationLoss distillation_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                                   std::span<const int> labels, double alpha, double beta,
                                   double temperature);

/// Trains `architecture` (12 inputs, 4 outputs) on hard labels only. Uses
/// the config's schedule; alpha, beta and temperature are ignored. The
/// travel-time standardization is fitted on `train` and stored in the model.
TrainingResult pretrain_teacher(const nn::Architecture& architecture, const Dataset& train,
                                const Dataset* test, const DistillationConfig& config);

/// Trains a fresh student under the distillation loss, with `teacher`
/// (eval mode) providing soft targets for every batch. The teacher is never
/// modified.
TrainingResult distill(const nn::Mlp& teacher, const nn::Architecture& student_architecture,
                       const Dataset& train, const Dataset& test, const DistillationConfig& config);

/// The student trained without a teacher: the beta = 0 special case of
/// distill() with the same seed and schedule.
TrainingResult train_standalone(const nn::Architecture& student_architecture, const Dataset& train,
                                const Dataset& test, const DistillationConfig& config);

/// Default teacher (four hidden layers with dropout) and the two-layer
/// batch-normalized student.
inline constexpr const char* kDefaultTeacherArchitecture = "10n-0.25DP-30n-0.35DP-20n-0.25DP-50n-0.45DP";
inline constexpr const char* kDefaultStudentArchitecture = "10n-20n+BN";

}  // namespace routekd::distill
