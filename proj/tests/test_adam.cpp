#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spt2ss/adam.hpp"
#include "spt2ss/ops.hpp"
#include "spt2ss/tensor.hpp"

using namespace spt2ss;

TEST_CASE("first step with unit gradient moves by about -lr") {
  // bias correction gives m_hat = g, v_hat = g^2, so the step is
  // -lr * g / (|g| + eps) = -lr to within eps.
  Tensor p = Tensor::scalar(1.0, true);
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt({p}, cfg);
  p.grad()[0] = 1.0;
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));

  Tensor q = Tensor::scalar(0.0, true);
  Adam opt2({q}, cfg);
  q.grad()[0] = -3.5;  // sign, not magnitude, sets the move
  opt2.step();
  CHECK(q.data()[0] == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("zero gradient leaves the parameter unchanged") {
  Tensor p = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Adam opt({p});
  p.grad().setZero();
  for (int i = 0; i < 10; ++i) opt.step();
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == 2.0);
  CHECK(p.data()[2] == 3.0);
}

TEST_CASE("identical parameters with identical gradients stay identical") {
  Tensor a = Tensor::scalar(0.7, true);
  Tensor b = Tensor::scalar(0.7, true);
  Adam opt({a, b});
  for (int i = 0; i < 25; ++i) {
    const double g = std::sin(0.3 * i) + 0.1;
    a.grad()[0] = g;
    b.grad()[0] = g;
    opt.step();
    CHECK(a.data()[0] == b.data()[0]);
    opt.zero_grad();
    CHECK(a.grad()[0] == 0.0);
    CHECK(b.grad()[0] == 0.0);
  }
  CHECK(opt.step_count() == 25);
}

TEST_CASE("zero_grad resets every entry to exactly zero") {
  Tensor p = Tensor::from_data({4}, {1.0, 1.0, 1.0, 1.0}, true);
  Adam opt({p});
  p.grad() << 0.5, -0.25, 3.0, -7.0;
  opt.zero_grad();
  for (int i = 0; i < 4; ++i) CHECK(p.grad()[i] == 0.0);
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor x = Tensor::scalar(5.0, true);
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt({x}, cfg);
  for (int i = 0; i < 2000; ++i) {
    Tensor loss = mul(x, x);
    loss.backward();
    opt.step();
    opt.zero_grad();
  }
  CHECK(std::abs(x.data()[0]) < 1e-2);
}

TEST_CASE("clip_global_norm scales only above the ceiling") {
  Tensor a = Tensor::from_data({2}, {0.0, 0.0}, true);
  Tensor b = Tensor::from_data({2}, {0.0, 0.0}, true);
  a.grad() << 3.0, 0.0;
  b.grad() << 0.0, 4.0;  // joint norm 5

  double norm = clip_global_norm({a, b}, 10.0);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(a.grad()[0] == 3.0);  // under the ceiling, untouched

  norm = clip_global_norm({a, b}, 1.0);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(b.grad()[1] == doctest::Approx(0.8).epsilon(1e-12));
}
