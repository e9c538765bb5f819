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

// End-to-end experiment: data generation, augmentation, teacher
// pretraining, distillation and the comparison report. Each step reads the
// artifacts of the previous steps from the output directory and writes its
// own artifacts plus a manifest (seed, row count, checksums of outputs and
// inputs).

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "routekd/distill.hpp"
#include "routekd/evaluation.hpp"
#include "routekd/route_data.hpp"

namespace routekd::pipeline {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kConfigEnvVar = "ROUTEKD_CONFIG";

struct GmmSettings {
  std::size_t k = 0;  // 0 selects k by BIC over 1..k_max
  std::size_t k_max = 10;
  std::size_t max_iter = 200;
  double tol = 1e-6;
  std::size_t n_samples = 10000;
};

struct RunConfig {
  std::filesystem::path out_dir = "routekd-out";
  std::uint64_t seed = 2026;

  route::TravelTimes travel_times = kDefaultTravelTimes;
  double alpha_b = route::kDefaultAlphaB;
  route::BaselineTransform baseline_transform = route::BaselineTransform::inverse;

  std::size_t basic_records = 10000;
  std::size_t participants = 41;
  route::SyntheticVrSpec vr = route::SyntheticVrSpec::defaults();
  GmmSettings gmm;
  double train_fraction = 0.8;

  std::string teacher_architecture = distill::kDefaultTeacherArchitecture;
  std::string student_architecture = distill::kDefaultStudentArchitecture;
  distill::DistillationConfig teacher_training;
  distill::DistillationConfig distillation;

  std::array<double, kNumExits> reference_volumes{};
  eval::Aggregation aggregation = eval::Aggregation::argmax_count;

  static RunConfig defaults();

  /// Checks every numeric precondition of the downstream steps and that the
  /// output directory can be created.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown top-level keys are rejected.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Seeds of the individual stages, all derived from RunConfig::seed.
struct StageSeeds {
  std::uint64_t basic, vr, gmm_fit, gmm_sample, vr_split, basic_split, teacher, student;
  static StageSeeds from(std::uint64_t seed);
};

/// Fixed artifact file names inside the output directory.
struct ArtifactPaths {
  std::filesystem::path basic_csv, vr_seed_csv, gmm_json, vr_augmented_csv;
  std::filesystem::path teacher_model, teacher_trace;
  std::filesystem::path distilled_model, distilled_trace;
  std::filesystem::path standalone_model, standalone_trace;
  std::filesystem::path report_csv, report_svg;

  explicit ArtifactPaths(const std::filesystem::path& out_dir);
  static std::filesystem::path manifest_for(const std::filesystem::path& artifact);
};

struct StepSummary {
  std::string command;
  std::vector<std::filesystem::path> outputs;
  std::string message;
};

StepSummary gen_basic(const RunConfig& config);
StepSummary gen_vr(const RunConfig& config);
StepSummary augment(const RunConfig& config);
StepSummary train_teacher(const RunConfig& config);
StepSummary distill_student(const RunConfig& config);
StepSummary evaluate(const RunConfig& config);

/// All six steps in order.
std::vector<StepSummary> run_all(const RunConfig& config);

/// run_all for each seed in its own `seed-<n>` subdirectory of out_dir,
/// pipelines running concurrently. Rethrows the first failure.
std::vector<eval::ComparisonReport> run_seed_sweep(const RunConfig& config,
                                                   const std::vector<std::uint64_t>& seeds);

/// Reads the report written by evaluate().
eval::ComparisonReport load_report(const RunConfig& config);

}  // namespace routekd::pipeline
