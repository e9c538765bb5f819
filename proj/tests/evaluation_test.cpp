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

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "routekd/errors.hpp"
#include "routekd/evaluation.hpp"

using namespace routekd;
using namespace routekd::eval;

namespace {

// Single dense layer 12 -> 4 with zero weights: logits equal the bias.
nn::Mlp constant_model(std::array<double, 4> bias) {
  nn::Mlp m(kNumFeatures, {nn::DenseSpec{4}}, 1);
  auto& d = std::get<nn::DenseLayer>(m.layers()[0]);
  std::fill(d.weight.data().begin(), d.weight.data().end(), 0.0);
  d.bias.assign(bias.begin(), bias.end());
  m.set_mode(nn::Mode::eval);
  return m;
}

Dataset records(const std::vector<DrivingRecord>& rs) { return make_dataset(rs, Provenance::vr); }

DrivingRecord rec(std::array<int, 4> lead, int choice) {
  DrivingRecord r;
  r.codes.fill(1);
  for (std::size_t i = 0; i < 4; ++i) r.codes[i] = lead[i];
  r.travel_time = 18.9;
  r.choice = choice;
  return r;
}

}  // namespace

TEST_CASE("accuracy") {
  const Dataset exit2 = route::sample_basic_data({0, 1, 0, 0}, 50, kDefaultTravelTimes, 1);
  CHECK(accuracy(constant_model({0, 1, 0, 0}), exit2) == 1.0);
  CHECK(accuracy(constant_model({0, 0, 1, 0}), exit2) == 0.0);
  // Ties resolve to the lowest exit index.
  CHECK(accuracy(constant_model({0, 0, 0, 0}), exit2) == 0.0);
  CHECK(predict(constant_model({0, 0, 0, 0}), exit2).front() == 0);

  const double one = accuracy(constant_model({0, 1, 0, 0}), exit2.subset({0}));
  CHECK((one == 0.0 || one == 1.0));

  SUBCASE("random model on random labels is near chance") {
    Rng rng(5);
    Dataset ds;
    ds.features = testing::random_matrix(rng, 10000, kNumFeatures, 0.0, 4.0);
    ds.labels = testing::random_labels(rng, 10000, 4);
    nn::Mlp m(kNumFeatures, nn::parse_architecture("8n"), 6);
    m.set_mode(nn::Mode::eval);
    CHECK(std::abs(accuracy(m, ds) - 0.25) < 0.02);
  }
  SUBCASE("invariant under positive rescaling of the logits") {
    Rng rng(7);
    Dataset ds;
    ds.features = testing::random_matrix(rng, 500, kNumFeatures, 0.0, 4.0);
    ds.labels = testing::random_labels(rng, 500, 4);
    nn::Mlp m(kNumFeatures, nn::parse_architecture("8n"), 8);
    m.set_mode(nn::Mode::eval);
    const double base = accuracy(m, ds);
    for (double c : {0.01, 0.5, 3.0, 250.0}) {
      nn::Mlp scaled = m;
      auto& head = std::get<nn::DenseLayer>(scaled.layers().back());
      for (double& w : head.weight.data()) w *= c;
      for (double& b : head.bias) b *= c;
      CHECK(accuracy(scaled, ds) == base);
    }
  }
  SUBCASE("errors") {
    nn::Mlp m = constant_model({0, 1, 0, 0});
    CHECK_THROWS_AS(accuracy(m, Dataset{}), ValidationError);
    m.set_mode(nn::Mode::train);
    CHECK_THROWS_AS(accuracy(m, exit2), UsageError);
    CHECK_THROWS_AS(predicted_exit_distribution(m, exit2), UsageError);
  }
}

TEST_CASE("predicted exit distribution") {
  const Dataset ds = route::sample_basic_data({0.25, 0.25, 0.25, 0.25}, 30, kDefaultTravelTimes, 2);
  const auto favour3 = predicted_exit_distribution(constant_model({0, 0, 2, 0}), ds);
  CHECK(favour3 == ExitProbabilities{0, 0, 1, 0});
  const auto uniform = predicted_exit_distribution(constant_model({1, 1, 1, 1}), ds, Aggregation::mean_prob);
  CHECK(uniform == ExitProbabilities{0.25, 0.25, 0.25, 0.25});
  CHECK_THROWS_AS(predicted_exit_distribution(constant_model({1, 1, 1, 1}), Dataset{}), ValidationError);

  SUBCASE("three hand-built records") {
    // Logits are the first four codes.
    nn::Mlp m(kNumFeatures, {nn::DenseSpec{4}}, 1);
    auto& d = std::get<nn::DenseLayer>(m.layers()[0]);
    std::fill(d.weight.data().begin(), d.weight.data().end(), 0.0);
    for (std::size_t i = 0; i < 4; ++i) d.weight(i, i) = 1.0;
    m.set_mode(nn::Mode::eval);
    const Dataset three = records({rec({3, 1, 1, 1}, 1), rec({1, 2, 1, 1}, 2), rec({1, 1, 1, 2}, 4)});

    const auto counts = predicted_exit_distribution(m, three, Aggregation::argmax_count);
    CHECK(counts == ExitProbabilities{1.0 / 3, 1.0 / 3, 0.0, 1.0 / 3});

    // [3,1,1,1]: e^3 / (e^3 + 3e) and e / (e^3 + 3e); [1,2,1,1] and
    // [1,1,1,2]: e^2 / (e^2 + 3e) and e / (e^2 + 3e).
    const double e = std::exp(1.0);
    const double big = std::exp(3.0) / (std::exp(3.0) + 3 * e), big_rest = e / (std::exp(3.0) + 3 * e);
    const double mid = std::exp(2.0) / (std::exp(2.0) + 3 * e), mid_rest = e / (std::exp(2.0) + 3 * e);
    const ExitProbabilities oracle{(big + 2 * mid_rest) / 3, (big_rest + mid + mid_rest) / 3,
                                   (big_rest + 2 * mid_rest) / 3, (big_rest + mid_rest + mid) / 3};
    const auto mean = predicted_exit_distribution(m, three, Aggregation::mean_prob);
    for (std::size_t k = 0; k < 4; ++k) CHECK(mean[k] == doctest::Approx(oracle[k]).epsilon(1e-14));
  }
  SUBCASE("argmax counts are exact multiples of 1/n") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.below(97);
      Dataset r;
      r.features = testing::random_matrix(rng, n, kNumFeatures, 0.0, 4.0);
      r.labels.assign(n, 0);
      nn::Mlp m(kNumFeatures, nn::parse_architecture("6n"), rng.next_u64());
      m.set_mode(nn::Mode::eval);
      const auto p = predicted_exit_distribution(m, r);
      long counted = 0;
      for (double v : p) {
        const double scaled = v * static_cast<double>(n);
        REQUIRE(std::abs(scaled - std::round(scaled)) < 1e-9);
        counted += std::lround(scaled);
      }
      REQUIRE(counted == static_cast<long>(n));
    }
  }
  CHECK(aggregation_from_string("mean_prob") == Aggregation::mean_prob);
  CHECK_THROWS_AS(aggregation_from_string("median"), ValidationError);
}

TEST_CASE("L1 distance") {
  const ExitProbabilities a{0.4, 0.3, 0.2, 0.1}, b{0.1, 0.2, 0.3, 0.4};
  CHECK(l1_distance(a, a) == 0.0);
  CHECK(l1_distance(a, b) == doctest::Approx(0.8).epsilon(1e-15));

  Rng rng(3);
  auto dist = [&] {
    ExitProbabilities p;
    double s = 0.0;
    for (double& v : p) s += v = rng.uniform();
    for (double& v : p) v /= s;
    return p;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = dist(), y = dist(), z = dist();
    REQUIRE(l1_distance(x, z) <= l1_distance(x, y) + l1_distance(y, z) + 1e-15);
  }
}

TEST_CASE("comparison report") {
  const ExitProbabilities base{0.4, 0.3, 0.2, 0.1}, model{0.3, 0.3, 0.2, 0.2}, ref{0.1, 0.2, 0.3, 0.4},
      vr{0.25, 0.25, 0.25, 0.25};
  const ComparisonReport r = build_report(base, model, ref, vr, {0.5, 0.75, 0.875});
  CHECK(r.l1_baseline == doctest::Approx(0.8));
  CHECK(r.l1_model == doctest::Approx(0.6));
  CHECK(build_report(ref, ref, ref, ref, {}).l1_model == 0.0);

  const std::string csv = report_to_csv(r);
  CHECK(report_from_csv(csv) == r);
  CHECK(csv.starts_with("exit,baseline,model,reference,vr_empirical\n"));
  std::size_t exit_rows = 0, accuracy_rows = 0;
  std::size_t pos = 0;
  while ((pos = csv.find('\n', pos)) != std::string::npos) {
    const std::string_view next = std::string_view(csv).substr(pos + 1);
    exit_rows += next.size() > 2 && next[0] >= '1' && next[0] <= '4' && next[1] == ',';
    accuracy_rows += next.starts_with("accuracy_");
    ++pos;
  }
  CHECK(exit_rows == 4);
  CHECK(accuracy_rows == 3);

  const std::string svg = report_to_svg(r);
  CHECK(svg.starts_with("<svg"));
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(report_to_svg(r) == svg);

  CHECK_THROWS_AS(build_report({0.5, 0.5, 0.5, 0.5}, model, ref, vr, {}), ValidationError);
  CHECK_THROWS_AS(report_from_csv("nonsense"), ParseError);
}
