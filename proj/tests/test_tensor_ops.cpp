#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spt2ss/grad_check.hpp"
#include "spt2ss/ops.hpp"
#include "spt2ss/rng.hpp"
#include "spt2ss/tensor.hpp"

using namespace spt2ss;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  Eigen::ArrayXd data(shape_numel(shape));
  for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

template <class Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("sigmoid at zero: value 0.5, derivative 0.25") {
  Tensor x = Tensor::scalar(0.0, true);
  Tensor y = sigmoid(x);
  CHECK(y.value() == doctest::Approx(0.5).epsilon(1e-15));
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("tanh at zero: value 0, derivative 1") {
  Tensor x = Tensor::scalar(0.0, true);
  Tensor y = tanh(x);
  CHECK(y.value() == 0.0);
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("d/dx (x*x) at x=3 is 6") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = mul(x, x);
  CHECK(y.value() == 9.0);
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("loss used directly has gradient 1; reuse accumulates to 2") {
  Tensor x = Tensor::scalar(4.0, true);
  Tensor loss = x * 1.0;
  loss.backward();
  CHECK(x.grad()[0] == 1.0);

  Tensor z = Tensor::scalar(4.0, true);
  Tensor twice = z + z;
  twice.backward();
  CHECK(z.grad()[0] == 2.0);
}

TEST_CASE("root keeps its own seed gradient after backward") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor loss = mul(x, x);
  loss.backward();
  REQUIRE(loss.node()->grad.size() == 1);
  CHECK(loss.node()->grad[0] == 1.0);
}

TEST_CASE("elementwise arithmetic and scalar broadcast") {
  Tensor a = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tensor b = Tensor::from_data({3}, {4.0, 5.0, 6.0}, true);
  Tensor s = Tensor::scalar(2.0, true);

  Tensor sum_ab = a + b;
  CHECK(sum_ab.data()[0] == 5.0);
  CHECK(sum_ab.data()[2] == 9.0);

  Tensor scaled = a * s;  // broadcast

  CHECK(scaled.data()[1] == 4.0);
  Tensor total = sum(scaled);
  total.backward();
  CHECK(s.grad()[0] == 6.0);  // sum of a
  CHECK(a.grad()[0] == 2.0);

  Tensor q = b / a;
  CHECK(q.data()[2] == 2.0);
}

TEST_CASE("shape mismatch error names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  const std::string msg = thrown_message([&] { add(a, b); });
  CHECK(msg.find("[2, 3]") != std::string::npos);
  CHECK(msg.find("[4]") != std::string::npos);
}

TEST_CASE("log rejects non-positive input") {
  Tensor x = Tensor::from_data({2}, {1.0, -0.5});
  CHECK_THROWS_AS(log(x), std::invalid_argument);
  Tensor z = Tensor::from_data({1}, {0.0});
  CHECK_THROWS_AS(log(z), std::invalid_argument);
}

TEST_CASE("pow rejects invalid domains") {
  Tensor x = Tensor::from_data({1}, {-2.0});
  CHECK_THROWS_AS(pow(x, 0.5), std::invalid_argument);
  CHECK(pow(x, 2.0).data()[0] == 4.0);  // integer exponent fine
}

TEST_CASE("matmul against identity and hand result") {
  Tensor a = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
  Tensor eye = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor ai = matmul(a, eye);
  for (int i = 0; i < 4; ++i) CHECK(ai.data()[i] == a.data()[i]);

  Tensor ones = Tensor::from_data({2, 1}, {1.0, 1.0});
  Tensor rowsum = matmul(a, ones);
  CHECK(rowsum.data()[0] == 3.0);
  CHECK(rowsum.data()[1] == 7.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
  CHECK(thrown_message([&] { matmul(a, b); }).find("inner dimensions") != std::string::npos);
}

TEST_CASE("gradient of sum(A.B) w.r.t. A is the row-sum matrix of B") {
  Rng rng(3);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor loss = sum(matmul(a, b));
  loss.backward();

  // dA[i][j] = sum_k B[j][k]
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double expect = b.data()[j * 2 + 0] + b.data()[j * 2 + 1];
      CHECK(a.grad()[i * 4 + j] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  const double err = max_grad_rel_error(
      [&] { return sum(matmul(a, b)); }, {a, b});
  CHECK(err < 1e-6);
}

TEST_CASE("softmax oracles") {
  Tensor equal = Tensor::from_data({1, 2}, {0.0, 0.0});
  Tensor se = softmax(equal);
  CHECK(se.data()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(se.data()[1] == doctest::Approx(0.5).epsilon(1e-15));

  Tensor single = Tensor::from_data({1, 1}, {123.45});
  CHECK(softmax(single).data()[0] == doctest::Approx(1.0).epsilon(1e-15));

  Tensor logs = Tensor::from_data({1, 3}, {std::log(1.0), std::log(2.0), std::log(3.0)});
  Tensor sl = softmax(logs);
  CHECK(sl.data()[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(sl.data()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sl.data()[2] == doctest::Approx(1.0 / 2.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and rejects NaN") {
  Tensor x = Tensor::from_data({1, 3}, {1000.0, 1001.0, 1002.0});
  Tensor y = softmax(x);
  const double total = y.data().sum();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  Tensor bad = Tensor::from_data({1, 2}, {std::nan(""), 0.0});
  CHECK_THROWS_AS(softmax(bad), std::invalid_argument);
}

TEST_CASE("softmax gradient matches finite differences") {
  Rng rng(4);
  Tensor x = random_tensor({2, 5}, rng, 2.0);
  Tensor w = random_tensor({2, 5}, rng);
  const double err = max_grad_rel_error(
      [&] { return sum(mul(softmax(x), w)); }, {x});
  CHECK(err < 1e-6);
}

TEST_CASE("conv1d hand oracle [1,2,3,4] x [1,0,-1]") {
  Tensor x = Tensor::from_data({1, 4, 1}, {1.0, 2.0, 3.0, 4.0});
  Tensor w = Tensor::from_data({3, 1, 1}, {1.0, 0.0, -1.0});
  Tensor y = conv1d(x, w);
  REQUIRE(y.shape() == Shape{1, 4, 1});
  CHECK(y.data()[0] == doctest::Approx(-2.0));
  CHECK(y.data()[1] == doctest::Approx(-2.0));
  CHECK(y.data()[2] == doctest::Approx(-2.0));
  CHECK(y.data()[3] == doctest::Approx(3.0));
}

TEST_CASE("conv1d zero kernel and identity kernel") {
  Rng rng(5);
  Tensor x = random_tensor({2, 6, 1}, rng);
  Tensor zero_w = Tensor::zeros({5, 1, 1});
  CHECK(conv1d(x, zero_w).data().abs().maxCoeff() == 0.0);

  Tensor id_w = Tensor::from_data({3, 1, 1}, {0.0, 1.0, 0.0});
  Tensor y = conv1d(x, id_w);
  for (int i = 0; i < 12; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv1d gradient matches finite differences") {
  Rng rng(6);
  Tensor x = random_tensor({2, 5, 2}, rng);
  Tensor w = random_tensor({3, 2, 3}, rng);
  Tensor mask = random_tensor({2, 5, 3}, rng);
  const double err = max_grad_rel_error(
      [&] { return sum(mul(conv1d(x, w), mask)); }, {x, w});
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  Rng rng(7);
  Tensor x = random_tensor({1, 4, 4, 1}, rng);
  Eigen::ArrayXd k = Eigen::ArrayXd::Zero(9);
  k[4] = 1.0;  // center of 3x3
  Tensor w = Tensor::from_data({3, 3, 1, 1}, k);
  Tensor y = conv2d(x, w);
  for (int i = 0; i < 16; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d all-ones kernel on all-ones input: center 9, corner 4") {
  Tensor x = Tensor::full({1, 3, 3, 1}, 1.0);
  Tensor w = Tensor::full({3, 3, 1, 1}, 1.0);
  Tensor y = conv2d(x, w);
  CHECK(y.data()[4] == doctest::Approx(9.0));  // center
  CHECK(y.data()[0] == doctest::Approx(4.0));  // corner
  CHECK(y.data()[1] == doctest::Approx(6.0));  // edge
}

TEST_CASE("conv2d gradient matches finite differences") {
  Rng rng(8);
  Tensor x = random_tensor({1, 4, 4, 2}, rng);
  Tensor w = random_tensor({3, 3, 2, 2}, rng);
  Tensor mask = random_tensor({1, 4, 4, 2}, rng);
  const double err = max_grad_rel_error(
      [&] { return sum(mul(conv2d(x, w), mask)); }, {x, w});
  CHECK(err < 1e-6);
}

TEST_CASE("add_bias adds per column and accumulates column sums backward") {
  Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
  Tensor b = Tensor::from_data({2}, {10.0, 20.0}, true);
  Tensor y = add_bias(x, b);
  CHECK(y.data()[0] == 11.0);
  CHECK(y.data()[3] == 24.0);
  sum(y).backward();
  CHECK(b.grad()[0] == 2.0);
  CHECK(b.grad()[1] == 2.0);
}

TEST_CASE("reshape, slice_last, concat_last, slice_time, stack_time round trips") {
  Rng rng(9);
  Tensor x = random_tensor({2, 3, 4}, rng);

  Tensor flat = reshape(x, {6, 4});
  CHECK(flat.shape() == Shape{6, 4});
  for (int i = 0; i < 24; ++i) CHECK(flat.data()[i] == x.data()[i]);

  Tensor left = slice_last(x, 0, 1);
  Tensor right = slice_last(x, 1, 3);
  Tensor glued = concat_last({left, right});
  for (int i = 0; i < 24; ++i) CHECK(glued.data()[i] == x.data()[i]);

  std::vector<Tensor> steps;
  for (int t = 0; t < 3; ++t) steps.push_back(slice_time(x, t));
  Tensor restacked = stack_time(steps);
  for (int i = 0; i < 24; ++i) CHECK(restacked.data()[i] == x.data()[i]);

  CHECK_THROWS_AS(slice_last(x, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(slice_time(x, 3), std::invalid_argument);
  CHECK_THROWS_AS(reshape(x, Shape{5, 5}), std::invalid_argument);
}

TEST_CASE("slice and concat gradients match finite differences") {
  Rng rng(10);
  Tensor x = random_tensor({2, 2, 4}, rng);
  Tensor mask = random_tensor({2, 2, 4}, rng);
  const double err = max_grad_rel_error(
      [&] {
        Tensor a = slice_last(x, 0, 2);
        Tensor b = slice_last(x, 2, 2);
        return sum(mul(concat_last({tanh(a), b}), mask));
      },
      {x});
  CHECK(err < 1e-6);
}

TEST_CASE("attn_scores and attn_context match manual evaluation") {
  // one sample, two positions, width 2
  Tensor q = Tensor::from_data({1, 2}, {1.0, 2.0}, true);
  Tensor keys = Tensor::from_data({1, 2, 2}, {3.0, 4.0, 5.0, 6.0}, true);
  Tensor scores = attn_scores(q, keys);
  CHECK(scores.data()[0] == doctest::Approx(11.0));  // 1*3 + 2*4
  CHECK(scores.data()[1] == doctest::Approx(17.0));  // 1*5 + 2*6

  Tensor alpha = Tensor::from_data({1, 2}, {0.25, 0.75}, true);
  Tensor ctx = attn_context(alpha, keys);
  CHECK(ctx.data()[0] == doctest::Approx(0.25 * 3.0 + 0.75 * 5.0));
  CHECK(ctx.data()[1] == doctest::Approx(0.25 * 4.0 + 0.75 * 6.0));
}

TEST_CASE("attention op gradients match finite differences") {
  Rng rng(11);
  Tensor q = random_tensor({2, 3}, rng);
  Tensor keys = random_tensor({2, 4, 3}, rng);
  Tensor values = random_tensor({2, 4, 3}, rng);
  Tensor mask = random_tensor({2, 3}, rng);
  const double err = max_grad_rel_error(
      [&] {
        Tensor alpha = softmax(attn_scores(q, keys));
        return sum(mul(attn_context(alpha, values), mask));
      },
      {q, keys, values});
  CHECK(err < 1e-6);
}

TEST_CASE("mean and mean_over_width") {
  Tensor x = Tensor::from_data({4}, {1.0, 2.0, 3.0, 4.0}, true);
  Tensor m = mean(x);
  CHECK(m.value() == doctest::Approx(2.5));
  m.backward();
  for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(0.25));

  // [1 x 2 x 2 x 1]: rows average their two width entries
  Tensor img = Tensor::from_data({1, 2, 2, 1}, {1.0, 3.0, 5.0, 7.0});
  Tensor rowmean = mean_over_width(img);
  REQUIRE(rowmean.shape() == Shape{1, 2, 1});
  CHECK(rowmean.data()[0] == doctest::Approx(2.0));
  CHECK(rowmean.data()[1] == doctest::Approx(6.0));
}

TEST_CASE("unary op gradients match finite differences") {
  Rng rng(12);
  Tensor x = random_tensor({6}, rng, 0.8);
  Tensor mask = random_tensor({6}, rng);
  const double err = max_grad_rel_error(
      [&] {
        Tensor t = tanh(x);
        Tensor s = sigmoid(x);
        Tensor e = exp(x);
        Tensor a = abs(add(x, 3.0));
        return sum(mul(add(add(t, s), add(e, a)), mask));
      },
      {x});
  CHECK(err < 1e-6);

  Tensor pos = Tensor::from_data({3}, {0.5, 1.5, 2.5}, true);
  const double err2 = max_grad_rel_error(
      [&] { return sum(add(log(pos), pow(pos, 1.7))); }, {pos});
  CHECK(err2 < 1e-6);
}

TEST_CASE("grad_check harness on closed forms") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  const double err = max_grad_rel_error([&] { return sum(mul(x, x)); }, {x});
  CHECK(err < 1e-9);

  Tensor y = Tensor::from_data({2}, {1.0, -1.0}, true);
  const double err_const = max_grad_rel_error(
      [&] { return sum(mul(y, 0.0)); }, {y});
  CHECK(err_const == 0.0);
}

TEST_CASE("NoGradGuard suppresses graph construction") {
  Tensor x = Tensor::scalar(2.0, true);
  NoGradGuard guard;
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("backward frees interior gradients but keeps leaves") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor mid = mul(x, x);
  Tensor loss = mul(mid, Tensor::scalar(2.0));
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(12.0));
  CHECK(mid.node()->grad.size() == 0);  // interior freed during the sweep
}
