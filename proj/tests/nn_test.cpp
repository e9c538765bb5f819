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
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "routekd/errors.hpp"
#include "routekd/model_io.hpp"
#include "routekd/nn.hpp"

using namespace routekd;
using namespace routekd::nn;

namespace {

DenseLayer& dense_at(Mlp& m, std::size_t i) { return std::get<DenseLayer>(m.layers().at(i)); }

Matrix row_of(std::vector<double> v) {
  const std::size_t n = v.size();
  return Matrix(1, n, std::move(v));
}

}  // namespace

TEST_CASE("architecture notation parses and formats") {
  const Architecture arch = parse_architecture("10n-0.25DP-20n+BN");
  REQUIRE(arch.size() == 7);
  CHECK(std::get<DenseSpec>(arch[0]).units == 10);
  CHECK(std::holds_alternative<ReluSpec>(arch[1]));
  CHECK(std::get<DropoutSpec>(arch[2]).rate == 0.25);
  CHECK(std::holds_alternative<BatchNormSpec>(arch[4]));
  CHECK(std::get<DenseSpec>(arch[6]).units == 4);
  CHECK(format_architecture(arch) == "10n-0.25DP-20n+BN");

  CHECK_THROWS_AS(parse_architecture("10x"), ParseError);
  CHECK_THROWS_AS(parse_architecture("10n--20n"), ParseError);
  CHECK_THROWS_AS(Mlp(3, parse_architecture("1.5DP"), 1), ValidationError);
}

TEST_CASE("forward: identity and zero dense layers") {
  Mlp m(4, {DenseSpec{4}}, 1);
  auto& d = dense_at(m, 0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) d.weight(i, j) = i == j ? 1.0 : 0.0;
  CHECK(m.forward(row_of({1, 2, 3, 4})) == row_of({1, 2, 3, 4}));

  std::fill(d.weight.data().begin(), d.weight.data().end(), 0.0);
  CHECK(m.forward(row_of({5, -2, 0.5, 9})) == row_of({0, 0, 0, 0}));
}

TEST_CASE("forward: two-layer network against a hand calculation") {
  // Hidden: x W1 + b1 = [1, -1] + [0.5, 0.5] = [1.5, -0.5] -> ReLU [1.5, 0].
  // Output: [1.5 * 2 + 0.1, 1.5 * 1 - 0.2] = [3.1, 1.3].
  Mlp m(2, {DenseSpec{2}, ReluSpec{}, DenseSpec{2}}, 3);
  auto& d1 = dense_at(m, 0);
  d1.weight = Matrix(2, 2, {1.0, -1.0, 2.0, 0.5});
  d1.bias = {0.5, 0.5};
  auto& d2 = dense_at(m, 2);
  d2.weight = Matrix(2, 2, {2.0, 1.0, -3.0, 4.0});
  d2.bias = {0.1, -0.2};
  const Matrix z = m.forward(row_of({1.0, 0.0}));
  CHECK(z(0, 0) == doctest::Approx(3.1).epsilon(1e-15));
  CHECK(z(0, 1) == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("forward rejects bad input") {
  Mlp m(3, parse_architecture("4n"), 1);
  CHECK_THROWS_AS(m.forward(Matrix(2, 4)), ShapeError);
  CHECK_THROWS_AS(m.forward(Matrix(0, 3)), ShapeError);
  Matrix bad(1, 3);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(m.forward(bad), ValidationError);
}

TEST_CASE("softmax") {
  SUBCASE("zero logits are uniform at any temperature") {
    for (double t : {0.1, 1.0, 7.5}) {
      const Matrix p = softmax(Matrix(1, 4, 0.0), t);
      for (double v : p.data()) CHECK(v == 0.25);
    }
  }
  SUBCASE("[1,2,3,4] matches extended-precision evaluation") {
    const Matrix z = row_of({1, 2, 3, 4});
    const Matrix p = softmax(z);
    const auto oracle = testing::softmax_row(z.row(0));
    // e^k / (e + e^2 + e^3 + e^4), evaluated by hand.
    const double frozen[] = {0.0320586033, 0.0871443187, 0.2368828181, 0.6439142599};
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(p(0, k) - static_cast<double>(oracle[k])) < 1e-15);
      CHECK(std::abs(p(0, k) - frozen[k]) < 1e-9);
    }
  }
  SUBCASE("large temperature approaches uniform") {
    const Matrix p = softmax(row_of({1, 2, 3, 4}), 1e6);
    for (double v : p.data()) CHECK(std::abs(v - 0.25) < 1e-5);
  }
  SUBCASE("extreme logits stay finite") {
    const Matrix p = softmax(row_of({1000, -1000, 0, 999}));
    CHECK(p.all_finite());
    CHECK(p(0, 0) + p(0, 1) + p(0, 2) + p(0, 3) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(softmax(row_of({1, 2}), 0.0), ValidationError);
  CHECK_THROWS_AS(softmax(row_of({1, 2}), -1.0), ValidationError);
}

TEST_CASE("softmax properties over random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cols = 2 + rng.below(6);
    const Matrix z = testing::random_matrix(rng, 1, cols, -20.0, 20.0);
    const double t = std::exp(rng.uniform(std::log(0.05), std::log(50.0)));
    const Matrix p = softmax(z, t);
    Matrix scaled = z;
    for (double& v : scaled.data()) v /= t;
    const Matrix q = softmax(scaled, 1.0);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      sum += p(0, c);
      REQUIRE(std::abs(p(0, c) - q(0, c)) <= 1e-12);
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-9);
    REQUIRE(argmax(p.row(0)) == argmax(z.row(0)));
  }
}

TEST_CASE("cross entropy") {
  const Matrix target = row_of({0, 0, 0, 1});
  CHECK(cross_entropy(target, target) == 0.0);
  CHECK(cross_entropy(row_of({0.25, 0.25, 0.25, 0.25}), target) == doctest::Approx(std::log(4.0)));
  // -ln(0.4)
  CHECK(cross_entropy(row_of({0.1, 0.2, 0.3, 0.4}), target) ==
        doctest::Approx(0.916290731874155).epsilon(1e-14));
  // log(0) is clamped.
  CHECK(cross_entropy(row_of({1, 0, 0, 0}), target) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(row_of({0.5, 0.5}), target), ShapeError);
}

TEST_CASE("cross entropy obeys Gibbs' inequality") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto dist = [&] {
      Matrix m = testing::random_matrix(rng, 1, 5, 0.01, 1.0);
      double s = 0.0;
      for (double v : m.data()) s += v;
      for (double& v : m.data()) v /= s;
      return m;
    };
    const Matrix p = dist();
    const Matrix q = dist();
    REQUIRE(cross_entropy(p, p) <= cross_entropy(q, p));
  }
}

TEST_CASE("backward") {
  SUBCASE("requires a cached train-mode forward") {
    Mlp m(2, parse_architecture("3n"), 1);
    CHECK_THROWS_AS(m.backward(Matrix(1, 4)), UsageError);
    m.set_mode(Mode::eval);
    m.forward(Matrix(1, 2, 1.0));
    CHECK_THROWS_AS(m.backward(Matrix(1, 4)), UsageError);
    m.set_mode(Mode::train);
    m.forward(Matrix(3, 2, 1.0));
    CHECK_THROWS_AS(m.backward(Matrix(2, 4)), ShapeError);
  }
  SUBCASE("zero upstream gradient gives zero gradients") {
    Mlp m(3, parse_architecture("5n+BN-0.3DP-4n"), 9);
    m.forward(Matrix(6, 3, 0.5));
    const Gradients g = m.backward(Matrix(6, 4, 0.0));
    for (const auto& lg : g) {
      for (double v : lg.weight) CHECK(v == 0.0);
      for (double v : lg.bias) CHECK(v == 0.0);
    }
  }
  SUBCASE("scalar dense layer: d(w x)/dw = x") {
    Mlp m(1, {DenseSpec{1}}, 2);
    m.forward(row_of({3.0}));
    const Gradients g = m.backward(row_of({1.0}));
    CHECK(g[0].weight[0] == 3.0);
    CHECK(g[0].bias[0] == 1.0);
  }
  SUBCASE("three-layer network matches central differences") {
    Rng rng(21);
    Mlp m(4, parse_architecture("6n+BN-0.3DP-5n-0.2DP", 3), 4);
    testing::randomize_biases(m, rng);
    const Matrix x = testing::random_matrix(rng, 8, 4, -2.0, 2.0);
    const std::vector<int> labels = testing::random_labels(rng, 8, 3);
    const auto check = testing::check_gradients(
        m, x, [&](const Matrix& z) { return testing::hard_loss(z, labels); },
        [&](const Matrix& z) { return softmax_cross_entropy_gradient(z, one_hot(labels, 3)); });
    CHECK(check.parameters > 50);
    CHECK(check.max_relative_error < 1e-4);
  }
}

TEST_CASE("sgd step") {
  Mlp m(1, {DenseSpec{1}}, 2);
  auto& d = dense_at(m, 0);
  d.weight(0, 0) = 2.0;
  d.bias[0] = 0.0;

  SUBCASE("zero gradient leaves the model unchanged") {
    const auto before = m.flatten_state();
    SgdState s;
    sgd_step(m, m.zero_gradients(), s);
    CHECK(m.flatten_state() == before);
  }
  SUBCASE("plain step") {
    Gradients g = m.zero_gradients();
    g[0].weight[0] = 0.5;
    SgdState s{1.0, 0.0, {}};
    sgd_step(m, g, s);
    CHECK(d.weight(0, 0) == 1.5);
  }
  SUBCASE("momentum recurrence over two steps") {
    // v1 = g, v2 = 0.9 g + g; w2 = w0 - lr (1 + 1.9) g = 2 - 0.1 * 2.9 * 0.5.
    Gradients g = m.zero_gradients();
    g[0].weight[0] = 0.5;
    SgdState s{0.1, 0.9, {}};
    sgd_step(m, g, s);
    sgd_step(m, g, s);
    CHECK(d.weight(0, 0) == doctest::Approx(1.855).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    Gradients g = m.zero_gradients();
    g[0].weight.push_back(1.0);
    SgdState s;
    CHECK_THROWS_AS(sgd_step(m, g, s), ShapeError);
  }
}

TEST_CASE("dropout") {
  const std::size_t rows = 2500;
  auto make = [](double rate) {
    Mlp m(4, {DenseSpec{4}, DropoutSpec{rate}}, 17);
    auto& d = std::get<DenseLayer>(m.layers()[0]);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) d.weight(i, j) = i == j ? 1.0 : 0.0;
    return m;
  };
  const Matrix ones(rows, 4, 1.0);

  SUBCASE("rate 0.5 zeroes about half and scales survivors by 2") {
    Mlp m = make(0.5);
    const Matrix out = m.forward(ones);
    std::size_t zeros = 0;
    for (double v : out.data()) {
      if (v == 0.0) ++zeros;
      else CHECK(v == 2.0);
    }
    const double frac = static_cast<double>(zeros) / static_cast<double>(out.size());
    CHECK(frac > 0.47);
    CHECK(frac < 0.53);

    m.set_mode(Mode::eval);
    CHECK(m.forward(ones) == ones);
  }
  SUBCASE("rate 0 is the identity in train mode") {
    Mlp m = make(0.0);
    CHECK(m.forward(ones) == ones);
  }
}

TEST_CASE("batch norm normalizes each feature over the batch") {
  Rng rng(3);
  Mlp m(3, {DenseSpec{5}, BatchNormSpec{}}, 8);
  const Matrix x = testing::random_matrix(rng, 16, 3, -10.0, 10.0);
  const Matrix y = m.forward(x);
  for (std::size_t c = 0; c < 5; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < 16; ++r) mean += y(r, c);
    mean /= 16.0;
    for (std::size_t r = 0; r < 16; ++r) var += (y(r, c) - mean) * (y(r, c) - mean);
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-7);
    CHECK(std::abs(var - 1.0) < 1e-5);
  }

  // Eval mode switches to running statistics: first update from (0, 1).
  const auto& bn = std::get<BatchNormLayer>(m.layers()[1]);
  CHECK(bn.running_var[0] != 1.0);
  m.set_mode(Mode::eval);
  CHECK(m.forward(x) == m.forward(x));
}

TEST_CASE("determinism: same seed, same parameters, masks and trajectory") {
  Rng rng(1);
  const Matrix x = testing::random_matrix(rng, 10, 6, -1.0, 1.0);
  const std::vector<int> labels = testing::random_labels(rng, 10, 4);
  auto run = [&] {
    Mlp m(6, parse_architecture("8n-0.5DP-6n+BN"), 99);
    SgdState s{0.05, 0.9, {}};
    std::vector<double> logits;
    for (int step = 0; step < 3; ++step) {
      const Matrix z = m.forward(x);
      logits.insert(logits.end(), z.data().begin(), z.data().end());
      sgd_step(m, m.backward(softmax_cross_entropy_gradient(z, one_hot(labels, 4))), s);
    }
    return std::make_pair(logits, m.flatten_state());
  };
  CHECK(run() == run());
  CHECK(Mlp(6, parse_architecture("8n"), 1).flatten_state() !=
        Mlp(6, parse_architecture("8n"), 2).flatten_state());
}

TEST_CASE("model serialization is bit-exact") {
  Rng rng(4);
  Mlp m(12, parse_architecture("10n-0.25DP-20n+BN"), 5);
  m.set_input_standardization(std::vector<double>(12, 0.1), std::vector<double>(12, 3.3));
  const Matrix x = testing::random_matrix(rng, 20, 12, 0.0, 5.0);
  (void)m.forward(x);
  SgdState sgd;
  sgd_step(m, m.backward(Matrix(20, 4, 0.01)), sgd);
  (void)m.forward(x);
  m.set_mode(Mode::eval);

  const std::string text = model_to_json(m).dump();
  const Mlp back = model_from_json(nlohmann::json::parse(text));
  CHECK(back.flatten_state() == m.flatten_state());
  CHECK(back.infer(x) == m.infer(x));
  CHECK(format_architecture(back.architecture()) == format_architecture(m.architecture()));
  CHECK(model_to_json(back).dump() == text);

  nlohmann::json broken = model_to_json(m);
  broken["version"] = 99;
  CHECK_THROWS_AS(model_from_json(broken), ParseError);
}
