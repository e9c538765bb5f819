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

// Driving-record types shared by the data generators, the GMM augmenter
// and the training code.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "routekd/matrix.hpp"

namespace routekd {

inline constexpr std::size_t kNumExits = 4;
inline constexpr std::size_t kNumOrdinalFields = 11;
inline constexpr std::size_t kNumFeatures = 12;  // ordinal fields + travel time
inline constexpr std::size_t kTravelTimeColumn = 11;

/// Code used for a contextual variable that is not observed (basic data).
inline constexpr int kAbsent = 0;

/// Name and largest valid code of each ordinal field, in feature order.
struct OrdinalField {
  std::string_view name;
  int max_code;
};
inline constexpr std::array<OrdinalField, kNumOrdinalFields> kOrdinalFields{{
    {"traffic", 3},
    {"urgency", 2},
    {"social_impact", 2},
    {"age", 2},
    {"gender", 2},
    {"race", 3},
    {"education", 3},
    {"employment", 4},
    {"concern", 4},
    {"familiarity", 5},
    {"financial", 5},
}};

/// Alternative-route travel times (minutes) after each of the four exits.
inline constexpr std::array<double, kNumExits> kDefaultTravelTimes{31.7, 18.9, 17.8, 13.9};

struct DrivingRecord {
  std::array<int, kNumOrdinalFields> codes{};  // order of kOrdinalFields; 0 = absent
  double travel_time = 0.0;                    // minutes
  int choice = 1;                              // exit number, 1..4

  int traffic() const { return codes[0]; }
  int urgency() const { return codes[1]; }
  int social_impact() const { return codes[2]; }

  friend bool operator==(const DrivingRecord&, const DrivingRecord&) = default;
};

/// Throws ValidationError naming the offending field.
void validate_record(const DrivingRecord& record);

enum class Provenance { vr, basic, synthetic_vr };

std::string to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

/// Encoded records: raw ordinal codes and travel time in minutes as
/// features, zero-based exit indices as labels.
struct Dataset {
  Matrix features{0, kNumFeatures};
  std::vector<int> labels;
  Provenance provenance = Provenance::vr;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  DrivingRecord record(std::size_t i) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Validates every record and packs them into a Dataset.
Dataset make_dataset(const std::vector<DrivingRecord>& records, Provenance provenance);

}  // namespace routekd
