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

#include "routekd/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include "routekd/errors.hpp"
#include "routekd/io_util.hpp"
#include "routekd/random.hpp"

namespace routekd::gmm {

using nlohmann::json;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log w_j + log N(x | mu_j, diag(var_j)) for every record and component.
Matrix weighted_log_densities(const GmmModel& model, const Matrix& data) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  Matrix out(n, model.k());
  for (std::size_t j = 0; j < model.k(); ++j) {
    double log_norm = 0.0;
    for (std::size_t c = 0; c < d; ++c) log_norm += kLog2Pi + std::log(model.variances[j][c]);
    const double log_w = std::log(model.weights[j]);
    for (std::size_t r = 0; r < n; ++r) {
      double quad = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dev = data(r, c) - model.means[j][c];
        quad += dev * dev / model.variances[j][c];
      }
      out(r, j) = log_w - 0.5 * (log_norm + quad);
    }
  }
  return out;
}

// Mean log-likelihood and (optionally) responsibilities in one pass.
double e_step(const GmmModel& model, const Matrix& data, Matrix* resp) {
  Matrix logp = weighted_log_densities(model, data);
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    auto row = logp.row(r);
    const double lse = log_sum_exp(row);
    total += lse;
    if (resp) {
      for (double& v : row) v = std::exp(v - lse);
    }
  }
  if (resp) *resp = std::move(logp);
  return total / static_cast<double>(data.rows());
}

std::vector<double> column_variance(const Matrix& data) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += data(r, c);
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = data(r, c) - mean[c];
      var[c] += dev * dev;
    }
  for (double& v : var) v = std::max(v / static_cast<double>(n), kVarianceFloor);
  return var;
}

// k-means++ seeding: first mean uniform, later ones by squared distance.
std::vector<std::vector<double>> seed_means(const Matrix& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.rows();
  std::vector<std::vector<double>> means;
  const auto first = static_cast<std::size_t>(rng.below(n));
  means.emplace_back(data.row(first).begin(), data.row(first).end());

  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  while (means.size() < k) {
    const auto& last = means.back();
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < data.cols(); ++c) {
        const double dev = data(r, c) - last[c];
        d2 += dev * dev;
      }
      dist2[r] = std::min(dist2[r], d2);
      total += dist2[r];
    }
    // All points already coincide with a mean: fall back to a uniform pick.
    const std::size_t pick = total > 0.0 ? rng.categorical(dist2) : rng.below(n);
    means.emplace_back(data.row(pick).begin(), data.row(pick).end());
  }
  return means;
}

}  // namespace

void validate(const GmmModel& model) {
  if (model.k() == 0) throw ValidationError("mixture has no components");
  if (model.means.size() != model.k() || model.variances.size() != model.k())
    throw ShapeError("mixture component arrays disagree in length");
  const std::size_t d = model.dim();
  double total = 0.0;
  for (std::size_t j = 0; j < model.k(); ++j) {
    if (!(model.weights[j] >= 0.0)) throw ValidationError("negative mixture weight");
    total += model.weights[j];
    if (model.means[j].size() != d || model.variances[j].size() != d)
      throw ShapeError("mixture component dimension mismatch");
    for (double v : model.variances[j])
      if (!(v >= kVarianceFloor)) throw ValidationError("variance below floor");
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights do not sum to 1");
}

double log_likelihood(const GmmModel& model, const Matrix& data) {
  if (data.cols() != model.dim())
    throw ShapeError("log_likelihood: data has " + std::to_string(data.cols()) +
                     " columns, model has dimension " + std::to_string(model.dim()));
  if (data.rows() == 0) throw ShapeError("log_likelihood: no records");
  return e_step(model, data, nullptr);
}

Matrix responsibilities(const GmmModel& model, const Matrix& data) {
  if (data.cols() != model.dim()) throw ShapeError("responsibilities: dimension mismatch");
  Matrix resp;
  e_step(model, data, &resp);
  return resp;
}

FitResult fit_em(const Matrix& data, std::size_t k, std::size_t max_iter, double tol,
                 std::uint64_t seed) {
  if (k < 1) throw ValidationError("mixture needs k >= 1");
  if (k > data.rows())
    throw ValidationError("k = " + std::to_string(k) + " exceeds record count " +
                          std::to_string(data.rows()));
  require_finite(data, "mixture data");

  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  Rng rng(seed);

  FitResult result;
  GmmModel& model = result.model;
  const std::vector<double> global_var = column_variance(data);
  model.means = seed_means(data, k, rng);
  model.variances.assign(k, global_var);
  model.weights.assign(k, 1.0 / static_cast<double>(k));

  Matrix resp;
  double ll = e_step(model, data, &resp);
  result.log_likelihood_history.push_back(ll);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // M-step.
    for (std::size_t j = 0; j < k; ++j) {
      double nk = 0.0;
      for (std::size_t r = 0; r < n; ++r) nk += resp(r, j);
      if (nk / static_cast<double>(n) < kDegenerateWeight) {
        const auto pick = static_cast<std::size_t>(rng.below(n));
        model.means[j].assign(data.row(pick).begin(), data.row(pick).end());
        model.variances[j] = global_var;
        model.weights[j] = 1.0 / static_cast<double>(n);
        ++result.reseeded_components;
        std::clog << "gmm: component " << j << " collapsed at iteration " << iter + 1
                  << ", re-seeded from record " << pick << "\n";
        continue;
      }
      model.weights[j] = nk / static_cast<double>(n);
      std::vector<double>& mean = model.means[j];
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += resp(r, j) * data(r, c);
      for (double& m : mean) m /= nk;
      std::vector<double>& var = model.variances[j];
      std::fill(var.begin(), var.end(), 0.0);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
          const double dev = data(r, c) - mean[c];
          var[c] += resp(r, j) * dev * dev;
        }
      for (double& v : var) v = std::max(v / nk, kVarianceFloor);
    }
    double total_w = 0.0;
    for (double w : model.weights) total_w += w;
    for (double& w : model.weights) w /= total_w;

    const double next = e_step(model, data, &resp);
    result.log_likelihood_history.push_back(next);
    result.iterations = iter + 1;
    const double gain = next - ll;
    ll = next;
    if (gain < tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::size_t parameter_count(const GmmModel& model) {
  return model.k() * 2 * model.dim() + (model.k() - 1);
}

double bic(const GmmModel& model, const Matrix& data) {
  const double n = static_cast<double>(data.rows());
  return -2.0 * n * log_likelihood(model, data) +
         static_cast<double>(parameter_count(model)) * std::log(n);
}

BicSelection select_by_bic(const Matrix& data, std::size_t k_max, std::size_t max_iter,
                           double tol, std::uint64_t seed) {
  if (k_max < 1) throw ValidationError("k_max must be >= 1");
  const std::size_t limit = std::min(k_max, data.rows());
  BicSelection selection;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= limit; ++k) {
    FitResult fit = fit_em(data, k, max_iter, tol, derive_seed(seed, k));
    const double score = bic(fit.model, data);
    selection.bic_by_k.push_back(score);
    if (score < best_bic) {
      best_bic = score;
      selection.best = std::move(fit);
    }
  }
  return selection;
}

OrdinalSchema OrdinalSchema::driving_records(const std::array<double, kNumExits>& travel_times) {
  OrdinalSchema schema;
  for (const auto& field : kOrdinalFields)
    schema.columns.push_back({std::string(field.name), true, 1.0, static_cast<double>(field.max_code)});
  const auto [lo, hi] = std::minmax_element(travel_times.begin(), travel_times.end());
  schema.columns.push_back({"travel_time", false, *lo, *hi});
  schema.columns.push_back({"choice", true, 1.0, static_cast<double>(kNumExits)});
  return schema;
}

bool OrdinalSchema::accepts(std::span<const double> row) const {
  if (row.size() != columns.size()) return false;
  for (std::size_t c = 0; c < row.size(); ++c) {
    const auto& col = columns[c];
    if (!(row[c] >= col.lo && row[c] <= col.hi)) return false;
    if (col.ordinal && row[c] != std::round(row[c])) return false;
  }
  return true;
}

Matrix sample_rows(const GmmModel& model, std::size_t n, const OrdinalSchema& schema,
                   std::uint64_t seed) {
  validate(model);
  if (n < 1) throw ValidationError("sample count must be >= 1");
  if (schema.columns.size() != model.dim())
    throw ShapeError("schema has " + std::to_string(schema.columns.size()) +
                     " columns, mixture dimension is " + std::to_string(model.dim()));
  Rng rng(seed);
  Matrix out(n, model.dim());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = rng.categorical(model.weights);
    for (std::size_t c = 0; c < model.dim(); ++c) {
      double v = rng.normal(model.means[j][c], std::sqrt(model.variances[j][c]));
      const auto& col = schema.columns[c];
      if (col.ordinal) v = std::round(v);
      out(r, c) = std::clamp(v, col.lo, col.hi);
    }
  }
  return out;
}

Dataset sample(const GmmModel& model, std::size_t n, const OrdinalSchema& schema,
               std::uint64_t seed) {
  if (schema.columns.size() != kNumFeatures + 1)
    throw ShapeError("driving-record sampling needs a 13-column schema");
  const Matrix rows = sample_rows(model, n, schema, seed);
  std::vector<DrivingRecord> records(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < kNumOrdinalFields; ++f) records[r].codes[f] = static_cast<int>(rows(r, f));
    records[r].travel_time = rows(r, kTravelTimeColumn);
    records[r].choice = static_cast<int>(rows(r, kNumFeatures));
  }
  return make_dataset(records, Provenance::synthetic_vr);
}

Matrix to_fit_matrix(const Dataset& dataset) {
  Matrix out(dataset.size(), kNumFeatures + 1);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    auto src = dataset.features.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[kNumFeatures] = dataset.labels[r] + 1;
  }
  return out;
}

json to_json(const GmmModel& model) {
  return {{"format", "routekd-gmm"},
          {"version", 1},
          {"k", model.k()},
          {"dim", model.dim()},
          {"weights", model.weights},
          {"means", model.means},
          {"variances", model.variances}};
}

GmmModel from_json(const json& doc) {
  if (doc.value("format", "") != "routekd-gmm") throw ParseError("not a routekd-gmm document");
  if (doc.value("version", 0) != 1) throw ParseError("unsupported gmm format version");
  GmmModel model;
  try {
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.means = doc.at("means").get<std::vector<std::vector<double>>>();
    model.variances = doc.at("variances").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("gmm json: ") + e.what());
  }
  validate(model);
  return model;
}

void save(const GmmModel& model, const std::filesystem::path& path) {
  write_text_file(path, to_json(model).dump(2) + "\n");
}

GmmModel load(const std::filesystem::path& path) { return from_json(parse_json_file(path)); }

}  // namespace routekd::gmm
