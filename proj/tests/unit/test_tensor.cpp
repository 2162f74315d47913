#include <doctest.h>

#include <cmath>

#include "ramtsf/gradcheck.hpp"
#include "ramtsf/tensor.hpp"

#include "helpers.hpp"

using namespace ramtsf;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::rand_tensor;

TEST_CASE("matmul hand values") {
  Tensor a = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from_data({2, 2}, {3, 4, 5, 6});
  CHECK(bitwise_equal(matmul(a, b), b));

  Tensor r = matmul(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 1}, {3, 4}));
  CHECK(r.shape() == Shape{1, 1});
  CHECK(r.item() == 11.0);
}

TEST_CASE("matmul identity is bitwise") {
  Rng rng(7);
  Tensor a = rand_tensor(rng, {5, 4}, 2.0);
  CHECK(bitwise_equal(matmul(Tensor::identity(5), a), a));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul gradient") {
  Rng rng(11);
  Tensor a = rand_tensor(rng, {5, 7}, 1.0, true);
  Tensor b = rand_tensor(rng, {7, 3}, 1.0, true);
  std::vector<Tensor> leaves = {a, b};
  double err = max_rel_error([&] { return sum(matmul(a, b)); }, leaves);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax constant row is uniform") {
  for (double beta : {0.1, 1.0, 10.0}) {
    Tensor y = softmax(Tensor::full({4}, 3.7), -1, beta);
    for (double v : y.data()) CHECK(std::fabs(v - 0.25) <= 1e-12);
  }
}

TEST_CASE("softmax exp ratio 1:3") {
  Tensor y = softmax(Tensor::from_data({2}, {0.0, std::log(3.0)}), -1, 1.0);
  CHECK(std::fabs(y.data()[0] - 0.25) <= 1e-12);
  CHECK(std::fabs(y.data()[1] - 0.75) <= 1e-12);
}

TEST_CASE("softmax matches direct evaluation and rows sum to 1") {
  Rng rng(13);
  Tensor x = rand_tensor(rng, {9}, 2.0, true);
  const double beta = 1.7;
  Tensor y = softmax(x, -1, beta);

  double mx = x.data()[0];
  for (double v : x.data()) mx = std::max(mx, v);
  double denom = 0.0;
  std::vector<double> direct(9);
  for (int i = 0; i < 9; ++i) {
    direct[i] = std::exp(beta * (x.data()[i] - mx));
    denom += direct[i];
  }
  double row_sum = 0.0;
  for (int i = 0; i < 9; ++i) {
    CHECK(std::fabs(y.data()[i] - direct[i] / denom) <= 1e-12);
    row_sum += y.data()[i];
  }
  CHECK(std::fabs(row_sum - 1.0) <= 1e-12);

  std::vector<Tensor> leaves = {x};
  Tensor w = rand_tensor(rng, {9});
  double err = max_rel_error([&] { return sum(mul(softmax(x, -1, beta), w)); }, leaves);
  CHECK(err < 1e-6);

  CHECK_THROWS_AS(softmax(x, -1, 0.0), ValueError);
  CHECK_THROWS_AS(softmax(x, -1, -2.0), ValueError);
}

TEST_CASE("layer_norm hand values") {
  Tensor ones = Tensor::full({3}, 1.0);
  Tensor zeros = Tensor::zeros({3});

  Tensor c = layer_norm(Tensor::full({3}, 5.0), ones, zeros, 1e-5);
  for (double v : c.data()) CHECK(v == 0.0);

  Tensor g2 = Tensor::full({2}, 1.0);
  Tensor b2 = Tensor::zeros({2});
  const double eps = 1e-5;
  Tensor r = layer_norm(Tensor::from_data({2}, {1.0, 3.0}), g2, b2, eps);
  const double expect = 1.0 / std::sqrt(1.0 + eps);  // mean 2, biased variance 1
  CHECK(std::fabs(r.data()[0] + expect) <= 1e-12);
  CHECK(std::fabs(r.data()[1] - expect) <= 1e-12);

  CHECK_THROWS_AS(layer_norm(Tensor::from_data({2}, {1.0, 3.0}), g2, b2, 0.0), ValueError);
}

TEST_CASE("layer_norm standardizes and differentiates") {
  Rng rng(17);
  Tensor x = rand_tensor(rng, {4, 8}, 2.0, true);
  Tensor g = Tensor::full({8}, 1.0, true);
  Tensor b = Tensor::zeros({8}, true);
  Tensor y = layer_norm(x, g, b);
  for (int i = 0; i < 4; ++i) {
    double in_mean = 0.0, in_var = 0.0;
    for (int j = 0; j < 8; ++j) in_mean += x.data()[static_cast<size_t>(i * 8 + j)];
    in_mean /= 8.0;
    for (int j = 0; j < 8; ++j) {
      double d = x.data()[static_cast<size_t>(i * 8 + j)] - in_mean;
      in_var += d * d;
    }
    in_var /= 8.0;

    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 8; ++j) mean += y.data()[static_cast<size_t>(i * 8 + j)];
    mean /= 8.0;
    for (int j = 0; j < 8; ++j) {
      double d = y.data()[static_cast<size_t>(i * 8 + j)] - mean;
      var += d * d;
    }
    var /= 8.0;
    CHECK(std::fabs(mean) < 1e-10);
    // The epsilon in the denominator shrinks the variance to v / (v + eps).
    CHECK(std::fabs(var - in_var / (in_var + 1e-5)) < 1e-10);
  }

  Tensor w = rand_tensor(rng, {4, 8});
  std::vector<Tensor> leaves = {x, g, b};
  double err = max_rel_error([&] { return sum(mul(layer_norm(x, g, b), w)); }, leaves);
  CHECK(err < 1e-5);
}

TEST_CASE("dropout identity modes") {
  Rng rng(19);
  Tensor x = rand_tensor(rng, {6, 6});
  Rng d1(1);
  CHECK(bitwise_equal(dropout(x, 0.0, RunMode::train, d1), x));
  Rng d2(1);
  CHECK(bitwise_equal(dropout(x, 0.5, RunMode::eval, d2), x));
  Rng d3(1);
  CHECK_THROWS_AS(dropout(x, 1.0, RunMode::train, d3), ValueError);
  CHECK_THROWS_AS(dropout(x, -0.1, RunMode::train, d3), ValueError);
}

TEST_CASE("dropout train statistics and determinism") {
  const int64_t n = 100000;
  Tensor x = Tensor::full({n}, 1.0);
  Rng d1(42);
  Tensor y = dropout(x, 0.5, RunMode::train, d1);
  int64_t survivors = 0;
  double total = 0.0;
  for (double v : y.data()) {
    if (v != 0.0) ++survivors;
    total += v;
  }
  double fraction = static_cast<double>(survivors) / static_cast<double>(n);
  CHECK(std::fabs(fraction - 0.5) < 0.01);
  CHECK(std::fabs(total / static_cast<double>(n) - 1.0) < 0.02);

  Rng d2(42);
  CHECK(bitwise_equal(dropout(x, 0.5, RunMode::train, d2), y));
}

TEST_CASE("relu and linear hand values") {
  Tensor r = relu(Tensor::from_data({3}, {-1.0, 0.0, 2.0}));
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[1] == 0.0);
  CHECK(r.data()[2] == 2.0);

  Rng rng(23);
  Tensor x = rand_tensor(rng, {4, 5});
  CHECK(bitwise_equal(linear(x, Tensor::identity(5), Tensor::zeros({5})), x));

  Tensor xg = rand_tensor(rng, {4, 5}, 1.0, true);
  Tensor w = rand_tensor(rng, {5, 3}, 0.6, true);
  Tensor b = rand_tensor(rng, {3}, 0.3, true);
  Tensor c = rand_tensor(rng, {4, 3});
  std::vector<Tensor> leaves = {xg, w, b};
  double err = max_rel_error([&] { return sum(mul(relu(linear(xg, w, b)), c)); }, leaves);
  CHECK(err < 1e-5);
}

TEST_CASE("backward basics") {
  Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  Tensor loss = sum(x);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);

  Tensor x2 = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  Tensor loss2 = scale(sum(mul(x2, x2)), 0.5);
  backward(loss2);
  for (int i = 0; i < 3; ++i) CHECK(x2.grad()[static_cast<size_t>(i)] == x2.data()[static_cast<size_t>(i)]);

  CHECK_THROWS_AS(backward(loss2), StateError);
  CHECK_THROWS_AS(backward(mul(x2, x2)), ShapeError);
}

TEST_CASE("non-finite results are rejected") {
  Tensor big = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(scale(big, 10.0), NotFiniteError);
  CHECK_THROWS_AS(rsqrt(Tensor::from_data({1}, {0.0})), ValueError);
}

TEST_CASE("movement ops round trip") {
  Rng rng(29);
  Tensor x = rand_tensor(rng, {3, 4, 5});

  CHECK(bitwise_equal(reshape(reshape(x, {12, 5}), {3, 4, 5}), x));
  CHECK(bitwise_equal(transpose(transpose(x, {1, 0, 2}), {1, 0, 2}), x));

  Tensor m = rand_tensor(rng, {4, 6});
  std::vector<Tensor> parts = {slice_last_axis(m, 0, 2), slice_last_axis(m, 2, 4)};
  CHECK(bitwise_equal(concat_last_axis(parts), m));
  std::vector<Tensor> rows = {slice_rows(m, 0, 1), slice_rows(m, 1, 3)};
  CHECK(bitwise_equal(concat_rows(rows), m));
}

TEST_CASE("split stack round trip") {
  Rng rng(31);
  Tensor e = rand_tensor(rng, {3, 4, 5});

  auto nodes = split(e, SplitAxis::node);
  REQUIRE(nodes.size() == 4);
  CHECK(nodes[0].shape() == Shape{3, 5});
  CHECK(bitwise_equal(stack(nodes, SplitAxis::node), e));

  auto steps = split(e, SplitAxis::time);
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].shape() == Shape{4, 5});
  CHECK(bitwise_equal(stack(steps, SplitAxis::time), e));

  Tensor single = rand_tensor(rng, {2, 1, 3});
  auto squeezed = split(single, SplitAxis::node);
  REQUIRE(squeezed.size() == 1);
  CHECK(bitwise_equal(squeezed[0], reshape(single, {2, 3})));

  // Splitting on one axis and restacking on the other permutes the first two
  // axes, which is exactly a transpose.
  Tensor swapped = stack(split(e, SplitAxis::node), SplitAxis::time);
  CHECK(bitwise_equal(swapped, transpose(e, {1, 0, 2})));
}

TEST_CASE("gather_rows scatters gradients back") {
  Tensor table = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  Tensor out = gather_rows(table, {2, 0, 2});
  CHECK(out.shape() == Shape{3, 2});
  CHECK(out.data()[0] == 5.0);
  CHECK(out.data()[5] == 6.0);
  backward(sum(out));
  CHECK(table.grad()[0] == 1.0);
  CHECK(table.grad()[2] == 0.0);
  CHECK(table.grad()[4] == 2.0);
}

TEST_CASE("causal mask layout") {
  Tensor m = causal_mask(4);
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      double v = m.data()[static_cast<size_t>(i * 4 + j)];
      if (j > i) {
        CHECK(v == kMaskedLogit);
      } else {
        CHECK(v == 0.0);
      }
    }
  }
}

TEST_CASE("rng determinism") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.gaussian() == b.gaussian());
  Rng c(123), d(124);
  bool differ = false;
  for (int i = 0; i < 10; ++i) differ = differ || (c.next_u64() != d.next_u64());
  CHECK(differ);
}

TEST_CASE("flop counter sees matmul cost") {
  FlopCounter fc;
  {
    FlopCounterScope scope(fc);
    matmul(Tensor::zeros({4, 4}), Tensor::zeros({4, 4}));
  }
  CHECK(fc.flops == 128);
}
