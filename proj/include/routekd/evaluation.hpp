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

#include <filesystem>
#include <string>
#include <string_view>

#include "routekd/nn.hpp"
#include "routekd/records.hpp"
#include "routekd/route_data.hpp"

namespace routekd::eval {

using route::ExitProbabilities;

/// Fraction of records whose argmax exit equals the label. Ties in the
/// logits resolve to the lowest exit index. The model must be in eval mode.
double accuracy(const nn::Mlp& model, const Dataset& dataset);

/// Predicted exit (zero-based) for every record.
std::vector<int> predict(const nn::Mlp& model, const Dataset& dataset);

enum class Aggregation {
  argmax_count,  // share of records predicting each exit
  mean_prob,     // mean softmax probability per exit
};

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

ExitProbabilities predicted_exit_distribution(const nn::Mlp& model, const Dataset& dataset,
                                              Aggregation mode = Aggregation::argmax_count);

double l1_distance(const ExitProbabilities& a, const ExitProbabilities& b);

struct Accuracies {
  double teacher_on_basic = 0.0;
  double student_standalone = 0.0;
  double distilled = 0.0;
  friend bool operator==(const Accuracies&, const Accuracies&) = default;
};

struct ComparisonReport {
  ExitProbabilities baseline{};
  ExitProbabilities model{};
  ExitProbabilities reference{};
  ExitProbabilities vr_empirical{};
  Accuracies accuracies;
  // L1 distance of each candidate column to the reference column.
  double l1_baseline = 0.0;
  double l1_model = 0.0;
  double l1_vr_empirical = 0.0;

  friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

ComparisonReport build_report(const ExitProbabilities& baseline, const ExitProbabilities& model_dist,
                              const ExitProbabilities& reference,
                              const ExitProbabilities& vr_empirical, const Accuracies& accuracies);

/// Two CSV blocks separated by a blank line: per-exit probabilities
/// (exit,baseline,model,reference,vr_empirical) then scalar metrics
/// (metric,value). Values use shortest round-trip formatting.
std::string report_to_csv(const ComparisonReport& report);
ComparisonReport report_from_csv(std::string_view text);

/// Grouped bar chart (four series per exit) as a standalone SVG document.
/// Output depends only on the report values.
std::string report_to_svg(const ComparisonReport& report);

void save_report(const ComparisonReport& report, const std::filesystem::path& csv_path,
                 const std::filesystem::path& svg_path);

}  // namespace routekd::eval
