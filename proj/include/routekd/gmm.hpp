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

// Diagonal-covariance Gaussian mixture: EM fitting, BIC model selection and
// schema-constrained sampling of synthetic records.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "routekd/matrix.hpp"
#include "routekd/records.hpp"

namespace routekd::gmm {

inline constexpr double kVarianceFloor = 1e-4;
/// Components whose mixing weight falls below this are re-seeded.
inline constexpr double kDegenerateWeight = 1e-8;

struct GmmModel {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;  // diagonal

  std::size_t k() const noexcept { return weights.size(); }
  std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
};

/// Throws ValidationError if weights are not a distribution, shapes disagree
/// or a variance is below the floor.
void validate(const GmmModel& model);

struct FitResult {
  GmmModel model;
  /// Mean per-record log-likelihood; entry 0 is the initialization, entry i
  /// the value after EM step i.
  std::vector<double> log_likelihood_history;
  std::size_t iterations = 0;
  std::size_t reseeded_components = 0;
  bool converged = false;
};

/// EM from a seeded k-means++ initialization. Stops once an iteration
/// improves the mean log-likelihood by less than `tol`, or after `max_iter`
/// iterations.
FitResult fit_em(const Matrix& data, std::size_t k, std::size_t max_iter, double tol,
                 std::uint64_t seed);

/// Mean per-record log density (log-sum-exp over components).
double log_likelihood(const GmmModel& model, const Matrix& data);

/// Posterior component probabilities, one row per record.
Matrix responsibilities(const GmmModel& model, const Matrix& data);

std::size_t parameter_count(const GmmModel& model);

/// -2 * total log-likelihood + parameter_count * ln(n).
double bic(const GmmModel& model, const Matrix& data);

struct BicSelection {
  FitResult best;
  std::vector<double> bic_by_k;  // index 0 holds k = 1
};

/// Fits k = 1..k_max (capped at the row count) and keeps the lowest BIC;
/// ties go to the smaller k.
BicSelection select_by_bic(const Matrix& data, std::size_t k_max, std::size_t max_iter,
                           double tol, std::uint64_t seed);

/// Value range of one sampled coordinate. Ordinal coordinates are rounded
/// to the nearest integer before clipping.
struct ColumnRange {
  std::string name;
  bool ordinal = true;
  double lo = 0.0;
  double hi = 0.0;
};

struct OrdinalSchema {
  std::vector<ColumnRange> columns;

  /// The 13 columns of a driving record: 11 ordinal fields, travel time
  /// (continuous, [min, max] of `travel_times`) and choice (1..4).
  static OrdinalSchema driving_records(const std::array<double, kNumExits>& travel_times);

  bool accepts(std::span<const double> row) const;
};

/// Draws a component by weight, then a diagonal Gaussian vector, then rounds
/// and clips every coordinate to the schema.
Matrix sample_rows(const GmmModel& model, std::size_t n, const OrdinalSchema& schema,
                   std::uint64_t seed);

/// sample_rows over the driving-record schema, packed as a Dataset
/// (columns 0..11 features, column 12 the exit number).
Dataset sample(const GmmModel& model, std::size_t n, const OrdinalSchema& schema,
               std::uint64_t seed);

/// Driving records as the 13-column matrix the mixture is fitted on.
Matrix to_fit_matrix(const Dataset& dataset);

nlohmann::json to_json(const GmmModel& model);
GmmModel from_json(const nlohmann::json& doc);
void save(const GmmModel& model, const std::filesystem::path& path);
GmmModel load(const std::filesystem::path& path);

}  // namespace routekd::gmm
