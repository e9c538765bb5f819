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

// Dataset construction: baseline ("basic") records, the synthetic stand-in
// for stated-choice VR records, reference exit probabilities, splitting,
// encoding and CSV persistence.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "routekd/records.hpp"

namespace routekd::route {

using ExitProbabilities = std::array<double, kNumExits>;
using TravelTimes = std::array<double, kNumExits>;

/// Throws ValidationError unless every p_i is in [0, 1] and they sum to 1
/// within 1e-9.
void validate_distribution(const ExitProbabilities& p, std::string_view what = "distribution");

inline constexpr double kDefaultAlphaB = 0.601;

/// How the aggregate model turns travel times into per-exit weights before
/// normalization: alpha*T (literal), alpha/T (inverse) or
/// exp(-alpha*T/mean(T)) (neg_exp).
enum class BaselineTransform { literal, inverse, neg_exp };

std::string to_string(BaselineTransform t);
BaselineTransform baseline_transform_from_string(std::string_view s);

ExitProbabilities baseline_distribution(const TravelTimes& travel_times, double alpha_b,
                                        BaselineTransform transform = BaselineTransform::inverse);

/// Urgency rule for basic data: a latent value uniform on 1..60 maps to
/// urgency 1 when <= 13, else 2.
inline constexpr int kUrgencyScaleMax = 60;
inline constexpr int kUrgencyThreshold = 13;

/// n records with choices drawn from `dist`, travel time of the chosen
/// exit, the urgency rule above, and every other contextual field absent.
Dataset sample_basic_data(const ExitProbabilities& dist, std::size_t n,
                          const TravelTimes& travel_times, std::uint64_t seed);

/// One contextual setting presented to every participant.
struct Scenario {
  int traffic = 1;
  int urgency = 2;
  int social_impact = 1;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Ground-truth multinomial logit used by the synthetic VR generator.
/// Utility of exit e for a record is
///   asc[e] + travel_time * T_e + sum_f field[f][e] * (code_f - 1).
struct ChoiceCoefficients {
  std::array<double, kNumExits> asc{};
  double travel_time = 0.0;  // per minute
  std::array<std::array<double, kNumExits>, kNumOrdinalFields> field{};
};

struct SyntheticVrSpec {
  int version = 1;
  std::vector<Scenario> scenarios;
  TravelTimes travel_times = kDefaultTravelTimes;
  ChoiceCoefficients coefficients;

  /// Ten scenarios (normal traffic without social impact; medium and heavy
  /// with and without it; each work- and home-bound) and coefficients under
  /// which heavy traffic sends most drivers to the first exit.
  static SyntheticVrSpec defaults();
};

nlohmann::json to_json(const SyntheticVrSpec& spec);
SyntheticVrSpec synthetic_vr_spec_from_json(const nlohmann::json& doc);

/// Choice probabilities of the ground-truth logit for one record.
ExitProbabilities choice_probabilities(const ChoiceCoefficients& coefficients,
                                       const TravelTimes& travel_times,
                                       const std::array<int, kNumOrdinalFields>& codes);

/// Exact population exit distribution of the generator: scenarios weighted
/// equally, demographics enumerated over their uniform grid.
ExitProbabilities expected_exit_distribution(const SyntheticVrSpec& spec);

/// One record per participant per scenario; demographics drawn uniformly
/// per participant, choices from the ground-truth logit.
Dataset generate_synthetic_vr(const SyntheticVrSpec& spec, std::size_t n_participants,
                              std::uint64_t seed);

/// Empirical share of each exit among the labels.
ExitProbabilities label_distribution(const Dataset& dataset);

/// p_e = V_e / sum V.
ExitProbabilities real_probabilities(const std::array<double, kNumExits>& volumes);

/// Seeded shuffle then partition into floor(n * f) training records and the
/// remainder.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed);

/// Index permutation behind split(); exposed for partition checks.
std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed);

/// Sets every travel time to that of the record's chosen exit.
void rekey_travel_times(Dataset& dataset, const TravelTimes& travel_times);

struct EncodedRecord {
  std::array<double, kNumFeatures> features{};
  int label = 0;  // zero-based exit
};

EncodedRecord encode(const DrivingRecord& record);
DrivingRecord decode(const EncodedRecord& encoded);

/// Travel-time standardization fitted on a training split.
struct TravelTimeScaler {
  double mean = 0.0;
  double stddev = 1.0;

  static TravelTimeScaler fit(const Dataset& train);
  double apply(double minutes) const { return (minutes - mean) / stddev; }

  /// Shift/scale vectors over all 12 features (identity except travel time).
  std::vector<double> shift() const;
  std::vector<double> scale() const;
};

/// Column names of the CSV format, in order.
const std::vector<std::string>& csv_header();

void save_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset);

/// Parses the CSV format; errors name the line and column.
Dataset load_csv(const std::filesystem::path& path, Provenance provenance = Provenance::vr);
Dataset parse_csv(std::string_view text, Provenance provenance = Provenance::vr);

}  // namespace routekd::route
