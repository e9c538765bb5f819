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

#include "routekd/route_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "routekd/errors.hpp"
#include "routekd/io_util.hpp"
#include "routekd/random.hpp"

namespace routekd::route {

using nlohmann::json;

namespace {

void require_positive_times(const TravelTimes& travel_times) {
  for (double t : travel_times) {
    if (!(t > 0.0) || !std::isfinite(t))
      throw ValidationError("travel times must be positive, got " + format_double(t));
  }
}

ExitProbabilities normalize(const std::array<double, kNumExits>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  ExitProbabilities p{};
  for (std::size_t e = 0; e < kNumExits; ++e) p[e] = weights[e] / total;
  return p;
}

}  // namespace

void validate_distribution(const ExitProbabilities& p, std::string_view what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError(std::string(what) + ": entry " + format_double(v) + " outside [0, 1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError(std::string(what) + ": entries sum to " + format_double(total));
}

std::string to_string(BaselineTransform t) {
  switch (t) {
    case BaselineTransform::literal: return "literal";
    case BaselineTransform::inverse: return "inverse";
    case BaselineTransform::neg_exp: return "neg_exp";
  }
  return "inverse";
}

BaselineTransform baseline_transform_from_string(std::string_view s) {
  if (s == "literal") return BaselineTransform::literal;
  if (s == "inverse") return BaselineTransform::inverse;
  if (s == "neg_exp") return BaselineTransform::neg_exp;
  throw ValidationError("unknown baseline transform '" + std::string(s) + "'");
}

ExitProbabilities baseline_distribution(const TravelTimes& travel_times, double alpha_b,
                                        BaselineTransform transform) {
  require_positive_times(travel_times);
  if (!(alpha_b > 0.0) || !std::isfinite(alpha_b))
    throw ValidationError("alpha_b must be a positive number");
  const double mean_time =
      std::accumulate(travel_times.begin(), travel_times.end(), 0.0) / kNumExits;
  std::array<double, kNumExits> w{};
  for (std::size_t e = 0; e < kNumExits; ++e) {
    switch (transform) {
      case BaselineTransform::literal: w[e] = alpha_b * travel_times[e]; break;
      case BaselineTransform::inverse: w[e] = alpha_b / travel_times[e]; break;
      case BaselineTransform::neg_exp: w[e] = std::exp(-alpha_b * travel_times[e] / mean_time); break;
    }
  }
  return normalize(w);
}

Dataset sample_basic_data(const ExitProbabilities& dist, std::size_t n,
                          const TravelTimes& travel_times, std::uint64_t seed) {
  validate_distribution(dist, "basic-data exit distribution");
  require_positive_times(travel_times);
  if (n < 1) throw ValidationError("basic data needs n >= 1");
  Rng rng(seed);
  std::vector<DrivingRecord> records(n);
  for (DrivingRecord& r : records) {
    const std::size_t exit = rng.categorical(dist);
    r.choice = static_cast<int>(exit) + 1;
    r.travel_time = travel_times[exit];
    const int latent_urgency = rng.between(1, kUrgencyScaleMax);
    r.codes.fill(kAbsent);
    r.codes[1] = latent_urgency <= kUrgencyThreshold ? 1 : 2;
  }
  return make_dataset(records, Provenance::basic);
}

SyntheticVrSpec SyntheticVrSpec::defaults() {
  SyntheticVrSpec spec;
  spec.scenarios = {
      {1, 1, 1}, {1, 2, 1},                          // normal: work- / home-bound
      {2, 1, 1}, {2, 2, 1}, {2, 1, 2}, {2, 2, 2},    // medium, +/- social impact
      {3, 1, 1}, {3, 2, 1}, {3, 1, 2}, {3, 2, 2},    // heavy, +/- social impact
  };
  ChoiceCoefficients& c = spec.coefficients;
  c.asc = {0.0, 0.0, 0.0, 0.0};
  c.travel_time = -0.08;
  c.field[0] = {1.6, 0.0, 0.0, 0.0};     // traffic: leave early when congested
  c.field[1] = {0.0, 0.0, 0.0, -0.8};    // non-urgent trips care less about time
  c.field[2] = {0.0, 0.0, 0.7, 0.0};     // social impact: follow the crowd to exit 3
  c.field[3] = {0.0, 0.2, 0.0, 0.0};     // age >= 25
  c.field[4] = {0.0, 0.0, 0.0, 0.0};     // gender
  c.field[5] = {0.0, 0.0, 0.0, 0.0};     // race
  c.field[6] = {0.0, 0.0, 0.0, 0.1};     // education
  c.field[7] = {0.0, 0.0, 0.0, 0.0};     // employment
  c.field[8] = {0.0, 0.0, 0.0, 0.15};    // concern
  c.field[9] = {-0.1, 0.0, 0.0, 0.0};    // familiarity
  c.field[10] = {0.0, 0.0, 0.1, 0.0};    // financial
  return spec;
}

json to_json(const SyntheticVrSpec& spec) {
  json scenarios = json::array();
  for (const Scenario& s : spec.scenarios)
    scenarios.push_back({{"traffic", s.traffic}, {"urgency", s.urgency}, {"social_impact", s.social_impact}});
  json fields = json::object();
  for (std::size_t f = 0; f < kNumOrdinalFields; ++f)
    fields[std::string(kOrdinalFields[f].name)] = spec.coefficients.field[f];
  return {{"version", spec.version},
          {"scenarios", std::move(scenarios)},
          {"travel_times", spec.travel_times},
          {"coefficients",
           {{"asc", spec.coefficients.asc},
            {"travel_time", spec.coefficients.travel_time},
            {"fields", std::move(fields)}}}};
}

SyntheticVrSpec synthetic_vr_spec_from_json(const json& doc) {
  SyntheticVrSpec spec;
  try {
    spec.version = doc.at("version").get<int>();
    if (spec.version != 1)
      throw ValidationError("unsupported scenario spec version " + std::to_string(spec.version));
    for (const auto& s : doc.at("scenarios")) {
      spec.scenarios.push_back({s.at("traffic").get<int>(), s.at("urgency").get<int>(),
                                s.at("social_impact").get<int>()});
    }
    if (doc.contains("travel_times")) spec.travel_times = doc.at("travel_times").get<TravelTimes>();
    const json& c = doc.at("coefficients");
    spec.coefficients.asc = c.value("asc", std::array<double, kNumExits>{});
    spec.coefficients.travel_time = c.value("travel_time", 0.0);
    if (c.contains("fields")) {
      for (const auto& [name, values] : c.at("fields").items()) {
        auto it = std::find_if(kOrdinalFields.begin(), kOrdinalFields.end(),
                               [&](const OrdinalField& f) { return f.name == name; });
        if (it == kOrdinalFields.end()) throw ValidationError("unknown coefficient field '" + name + "'");
        spec.coefficients.field[static_cast<std::size_t>(it - kOrdinalFields.begin())] =
            values.get<std::array<double, kNumExits>>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario spec: ") + e.what());
  }
  return spec;
}

ExitProbabilities choice_probabilities(const ChoiceCoefficients& coefficients,
                                       const TravelTimes& travel_times,
                                       const std::array<int, kNumOrdinalFields>& codes) {
  std::array<double, kNumExits> utility{};
  for (std::size_t e = 0; e < kNumExits; ++e) {
    double u = coefficients.asc[e] + coefficients.travel_time * travel_times[e];
    for (std::size_t f = 0; f < kNumOrdinalFields; ++f) {
      if (codes[f] == kAbsent) continue;
      u += coefficients.field[f][e] * (codes[f] - 1);
    }
    utility[e] = u;
  }
  const double m = *std::max_element(utility.begin(), utility.end());
  for (double& u : utility) u = std::exp(u - m);
  return normalize(utility);
}

namespace {

void validate_scenarios(const SyntheticVrSpec& spec) {
  if (spec.scenarios.empty()) throw ValidationError("scenario list is empty");
  require_positive_times(spec.travel_times);
  for (const Scenario& s : spec.scenarios) {
    if (s.traffic < 1 || s.traffic > kOrdinalFields[0].max_code || s.urgency < 1 ||
        s.urgency > kOrdinalFields[1].max_code || s.social_impact < 1 ||
        s.social_impact > kOrdinalFields[2].max_code)
      throw ValidationError("scenario codes outside their ranges");
  }
}

}  // namespace

ExitProbabilities expected_exit_distribution(const SyntheticVrSpec& spec) {
  validate_scenarios(spec);
  std::array<double, kNumExits> acc{};
  std::size_t combos = 0;
  std::array<int, kNumOrdinalFields> codes{};
  // Odometer over the demographic fields (indices 3..10).
  for (const Scenario& s : spec.scenarios) {
    codes.fill(1);
    codes[0] = s.traffic;
    codes[1] = s.urgency;
    codes[2] = s.social_impact;
    while (true) {
      const ExitProbabilities p = choice_probabilities(spec.coefficients, spec.travel_times, codes);
      for (std::size_t e = 0; e < kNumExits; ++e) acc[e] += p[e];
      ++combos;
      std::size_t f = 3;
      while (f < kNumOrdinalFields && codes[f] == kOrdinalFields[f].max_code) codes[f++] = 1;
      if (f == kNumOrdinalFields) break;
      ++codes[f];
    }
  }
  for (double& a : acc) a /= static_cast<double>(combos);
  return normalize(acc);
}

Dataset generate_synthetic_vr(const SyntheticVrSpec& spec, std::size_t n_participants,
                              std::uint64_t seed) {
  validate_scenarios(spec);
  if (n_participants < 1) throw ValidationError("need at least one participant");
  Rng rng(seed);
  std::vector<DrivingRecord> records;
  records.reserve(n_participants * spec.scenarios.size());
  for (std::size_t p = 0; p < n_participants; ++p) {
    std::array<int, kNumOrdinalFields> codes{};
    for (std::size_t f = 3; f < kNumOrdinalFields; ++f) codes[f] = rng.between(1, kOrdinalFields[f].max_code);
    for (const Scenario& s : spec.scenarios) {
      codes[0] = s.traffic;
      codes[1] = s.urgency;
      codes[2] = s.social_impact;
      const ExitProbabilities probs = choice_probabilities(spec.coefficients, spec.travel_times, codes);
      const std::size_t exit = rng.categorical(probs);
      DrivingRecord r;
      r.codes = codes;
      r.choice = static_cast<int>(exit) + 1;
      r.travel_time = spec.travel_times[exit];
      records.push_back(r);
    }
  }
  return make_dataset(records, Provenance::synthetic_vr);
}

ExitProbabilities label_distribution(const Dataset& dataset) {
  if (dataset.empty()) throw ValidationError("label distribution of an empty dataset");
  std::array<std::size_t, kNumExits> counts{};
  for (int label : dataset.labels) ++counts[static_cast<std::size_t>(label)];
  ExitProbabilities p{};
  for (std::size_t e = 0; e < kNumExits; ++e)
    p[e] = static_cast<double>(counts[e]) / static_cast<double>(dataset.size());
  return p;
}

ExitProbabilities real_probabilities(const std::array<double, kNumExits>& volumes) {
  double total = 0.0;
  for (double v : volumes) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("traffic volumes must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw ValidationError("traffic volumes are all zero");
  ExitProbabilities p{};
  for (std::size_t e = 0; e < kNumExits; ++e) p[e] = volumes[e] / total;
  return p;
}

std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train fraction must be in (0, 1)");
  if (dataset.size() < 2) throw ValidationError("cannot split fewer than 2 records");
  const std::vector<std::size_t> order = split_order(dataset.size(), seed);
  const auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(dataset.size()) * train_fraction));
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {dataset.subset(train_idx), dataset.subset(test_idx)};
}

void rekey_travel_times(Dataset& dataset, const TravelTimes& travel_times) {
  require_positive_times(travel_times);
  for (std::size_t r = 0; r < dataset.size(); ++r)
    dataset.features(r, kTravelTimeColumn) = travel_times[static_cast<std::size_t>(dataset.labels[r])];
}

EncodedRecord encode(const DrivingRecord& record) {
  validate_record(record);
  EncodedRecord out;
  for (std::size_t f = 0; f < kNumOrdinalFields; ++f) out.features[f] = record.codes[f];
  out.features[kTravelTimeColumn] = record.travel_time;
  out.label = record.choice - 1;
  return out;
}

DrivingRecord decode(const EncodedRecord& encoded) {
  DrivingRecord r;
  for (std::size_t f = 0; f < kNumOrdinalFields; ++f) r.codes[f] = static_cast<int>(encoded.features[f]);
  r.travel_time = encoded.features[kTravelTimeColumn];
  r.choice = encoded.label + 1;
  validate_record(r);
  return r;
}

TravelTimeScaler TravelTimeScaler::fit(const Dataset& train) {
  if (train.empty()) throw ValidationError("cannot fit travel-time scaler on an empty split");
  const double n = static_cast<double>(train.size());
  double mean = 0.0;
  for (std::size_t r = 0; r < train.size(); ++r) mean += train.features(r, kTravelTimeColumn);
  mean /= n;
  double var = 0.0;
  for (std::size_t r = 0; r < train.size(); ++r) {
    const double dev = train.features(r, kTravelTimeColumn) - mean;
    var += dev * dev;
  }
  var /= n;
  TravelTimeScaler s;
  s.mean = mean;
  s.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

std::vector<double> TravelTimeScaler::shift() const {
  std::vector<double> v(kNumFeatures, 0.0);
  v[kTravelTimeColumn] = mean;
  return v;
}

std::vector<double> TravelTimeScaler::scale() const {
  std::vector<double> v(kNumFeatures, 1.0);
  v[kTravelTimeColumn] = stddev;
  return v;
}

const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header = [] {
    std::vector<std::string> h;
    for (const auto& f : kOrdinalFields) h.emplace_back(f.name);
    h.emplace_back("travel_time");
    h.emplace_back("choice");
    return h;
  }();
  return header;
}

std::string to_csv(const Dataset& dataset) {
  std::string out;
  const auto& header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const DrivingRecord rec = dataset.record(r);
    for (int code : rec.codes) {
      out += std::to_string(code);
      out += ',';
    }
    out += format_double(rec.travel_time);
    out += ',';
    out += std::to_string(rec.choice);
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, to_csv(dataset));
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void fail(std::size_t line_no, std::string_view column, const std::string& msg) {
  std::ostringstream os;
  os << "line " << line_no;
  if (!column.empty()) os << ", column " << column;
  os << ": " << msg;
  throw ParseError(os.str());
}

}  // namespace

Dataset parse_csv(std::string_view text, Provenance provenance) {
  const auto& header = csv_header();
  std::vector<DrivingRecord> records;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto fields = split_fields(line);
    if (!saw_header) {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (i >= fields.size()) fail(line_no, header[i], "missing column in header");
        if (fields[i] != header[i])
          fail(line_no, header[i], "expected header '" + header[i] + "', found '" + std::string(fields[i]) + "'");
      }
      if (fields.size() != header.size()) fail(line_no, "", "unexpected extra header columns");
      saw_header = true;
      continue;
    }
    if (line.empty()) {
      if (pos >= text.size()) break;
      fail(line_no, "", "blank line");
    }
    if (fields.size() != header.size())
      fail(line_no, fields.size() < header.size() ? header[fields.size()] : std::string_view{},
           "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));

    DrivingRecord rec;
    for (std::size_t i = 0; i < header.size(); ++i) {
      double value = 0.0;
      if (!parse_double(fields[i], value) || !std::isfinite(value))
        fail(line_no, header[i], "non-numeric value '" + std::string(fields[i]) + "'");
      const bool integral = i != kTravelTimeColumn;
      if (integral && value != std::floor(value))
        fail(line_no, header[i], "expected an integer code, found '" + std::string(fields[i]) + "'");
      if (i < kNumOrdinalFields) {
        if (value != kAbsent && (value < 1 || value > kOrdinalFields[i].max_code))
          fail(line_no, header[i], "code " + std::string(fields[i]) + " outside 1.." +
                                       std::to_string(kOrdinalFields[i].max_code));
        rec.codes[i] = static_cast<int>(value);
      } else if (i == kTravelTimeColumn) {
        if (!(value > 0.0)) fail(line_no, header[i], "travel time must be positive");
        rec.travel_time = value;
      } else {
        if (value < 1 || value > static_cast<double>(kNumExits))
          fail(line_no, header[i], "exit " + std::string(fields[i]) + " outside 1..4");
        rec.choice = static_cast<int>(value);
      }
    }
    records.push_back(rec);
  }
  if (!saw_header) throw ParseError("line 1: missing header row");
  return make_dataset(records, provenance);
}

Dataset load_csv(const std::filesystem::path& path, Provenance provenance) {
  const std::string text = read_text_file(path);
  try {
    return parse_csv(text, provenance);
  } catch (const ParseError& e) {
    throw ParseError("'" + path.string() + "' " + e.what());
  }
}

}  // namespace routekd::route
