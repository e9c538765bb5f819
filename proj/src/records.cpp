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

#include "routekd/records.hpp"

#include <cmath>

#include "routekd/errors.hpp"

namespace routekd {

void validate_record(const DrivingRecord& record) {
  for (std::size_t i = 0; i < kNumOrdinalFields; ++i) {
    const int code = record.codes[i];
    if (code != kAbsent && (code < 1 || code > kOrdinalFields[i].max_code)) {
      throw ValidationError(std::string(kOrdinalFields[i].name) + " = " + std::to_string(code) +
                            " outside 1.." + std::to_string(kOrdinalFields[i].max_code));
    }
  }
  if (!(record.travel_time > 0.0) || !std::isfinite(record.travel_time))
    throw ValidationError("travel_time must be a positive number of minutes");
  if (record.choice < 1 || record.choice > static_cast<int>(kNumExits))
    throw ValidationError("choice = " + std::to_string(record.choice) + " outside 1..4");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::vr: return "vr";
    case Provenance::basic: return "basic";
    case Provenance::synthetic_vr: return "synthetic-vr";
  }
  return "vr";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "vr") return Provenance::vr;
  if (s == "basic") return Provenance::basic;
  if (s == "synthetic-vr") return Provenance::synthetic_vr;
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

DrivingRecord Dataset::record(std::size_t i) const {
  DrivingRecord r;
  auto row = features.row(i);
  for (std::size_t f = 0; f < kNumOrdinalFields; ++f) r.codes[f] = static_cast<int>(row[f]);
  r.travel_time = row[kTravelTimeColumn];
  r.choice = labels[i] + 1;
  return r;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.provenance = provenance;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  return out;
}

Dataset make_dataset(const std::vector<DrivingRecord>& records, Provenance provenance) {
  Dataset ds;
  ds.provenance = provenance;
  ds.features = Matrix(records.size(), kNumFeatures);
  ds.labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate_record(records[i]);
    auto row = ds.features.row(i);
    for (std::size_t f = 0; f < kNumOrdinalFields; ++f) row[f] = records[i].codes[f];
    row[kTravelTimeColumn] = records[i].travel_time;
    ds.labels.push_back(records[i].choice - 1);
  }
  return ds;
}

}  // namespace routekd
