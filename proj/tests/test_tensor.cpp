#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rgdno/errors.hpp"
#include "rgdno/rng.hpp"
#include "rgdno/tensor.hpp"

using namespace rgdno;

TEST_CASE("elementwise forward values") {
  auto a = Tensor::from({3}, {1.0, 2.0, 3.0});
  auto b = Tensor::from({3}, {4.0, 5.0, 6.0});
  auto c = add(a, b);
  CHECK(c.at(0) == 5.0);
  CHECK(c.at(2) == 9.0);
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5));
  CHECK(rgdno::tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(softplus(Tensor::scalar(100.0)).item() == doctest::Approx(100.0));
  CHECK(softplus(Tensor::scalar(-100.0)).item() == doctest::Approx(0.0));
}

TEST_CASE("matmul identity maps a vector to itself") {
  auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto v = Tensor::from({3}, {0.3, -1.7, 2.5});
  auto mv = matmul(eye, v);
  for (int i = 0; i < 3; ++i) CHECK(mv.at(i) == v.at(i));
  auto vm = matmul(v, eye);
  for (int i = 0; i < 3; ++i) CHECK(vm.at(i) == v.at(i));
}

TEST_CASE("matmul rejects mismatched shapes with a descriptive message") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       "matmul: incompatible shapes [2,3] and [2,3]",
                       ValidationError);
}

TEST_CASE("broadcasting add of row stats over a matrix") {
  auto m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto row = Tensor::from({3}, {10, 20, 30});
  auto out = add(m, row);
  CHECK(out.at(0, 0) == 11.0);
  CHECK(out.at(1, 2) == 36.0);
  auto col = Tensor::from({2, 1}, {100, 200});
  auto out2 = add(m, col);
  CHECK(out2.at(0, 2) == 103.0);
  CHECK(out2.at(1, 0) == 204.0);
}

TEST_CASE("grad of sum of squares") {
  auto z = Tensor::from({3}, {1.0, 2.0, 3.0}).set_requires_grad();
  auto loss = sum(square(z));
  backward(loss);
  auto g = z.grad();
  CHECK(g.at(0) == 2.0);
  CHECK(g.at(1) == 4.0);
  CHECK(g.at(2) == 6.0);
}

TEST_CASE("constant loss leaves zero gradients") {
  auto z = Tensor::from({2}, {1.0, 2.0}).set_requires_grad();
  auto c = Tensor::scalar(7.0);
  backward(c);  // no-op: loss does not depend on anything tracked
  auto g = z.grad();
  CHECK(g.at(0) == 0.0);
  CHECK(g.at(1) == 0.0);
}

TEST_CASE("sigmoid derivative at zero matches finite differences") {
  auto x = Tensor::from({1}, {0.0}).set_requires_grad();
  auto y = sigmoid(x);
  backward(y);
  const double ad = x.grad().item();
  CHECK(ad == doctest::Approx(0.25));
  auto fd = oracle::finite_difference(
      x, [&] { return sigmoid(x).item(); }, 1e-5);
  CHECK(std::abs(ad - fd[0]) < 1e-8);
}

TEST_CASE("gradient check across a composite expression") {
  Rng rng(7);
  auto x = Tensor::from({4, 3}, rng.normal_vector(12)).set_requires_grad();
  auto w = Tensor::from({3, 2}, rng.normal_vector(6)).set_requires_grad();
  auto f = [&] {
    auto h = rgdno::tanh(matmul(x, w));
    auto s = sigmoid(slice(h, 1, 0, 1));
    return mean(square(s * 2.0 - rgdno::exp(slice(h, 1, 1, 1)) / 3.0));
  };
  auto loss = f();
  backward(loss);
  auto gt = x.grad();
  const auto& gx = gt.values();
  auto fd = oracle::finite_difference(x, [&] { return f().item(); }, 1e-5);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < gx.size(); ++i) idx.push_back(i);
  CHECK(oracle::gradient_error(gx, fd, idx) < 1e-6);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(21);
  auto z = Tensor::from({5}, rng.normal_vector(5)).set_requires_grad();
  auto l1 = [&] { return sum(square(z)); };
  auto l2 = [&] { return mean(rgdno::exp(z * 0.3)); };

  backward(l1());
  auto g1t = z.grad();
  const auto g1 = g1t.values();
  backward(l2());
  auto g2t = z.grad();
  const auto g2 = g2t.values();
  backward(l1() * 2.5 + l2() * (-1.25));
  auto gt = z.grad();
  const auto& g = gt.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] == doctest::Approx(2.5 * g1[i] - 1.25 * g2[i]).epsilon(1e-12));
  }
}

TEST_CASE("max takes the subgradient of the first maximal element") {
  auto x = Tensor::from({4}, {1.0, 3.0, 3.0, 2.0}).set_requires_grad();
  auto m = max(x);
  CHECK(m.item() == 3.0);
  backward(m);
  auto g = x.grad();
  CHECK(g.at(1) == 1.0);  // first of the tied maxima
  CHECK(g.at(2) == 0.0);
  CHECK(g.at(3) == 0.0);
}

TEST_CASE("non-scalar loss is rejected") {
  auto x = Tensor::from({2}, {1.0, 2.0}).set_requires_grad();
  CHECK_THROWS_AS(backward(x * 2.0), ValidationError);
}

TEST_CASE("non-finite gradients are reported with the offending node") {
  auto x = Tensor::from({1}, {0.0}).set_requires_grad();
  auto loss = rgdno::log(x);  // -inf forward, 1/0 gradient
  CHECK_THROWS_AS(backward(loss), RuntimeFailure);
}

TEST_CASE("assert_all_finite names the check") {
  auto bad = Tensor::from({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(assert_all_finite(bad, "loss"), RuntimeFailure);
  auto ok = Tensor::from({2}, {1.0, 2.0});
  CHECK_NOTHROW(assert_all_finite(ok, "loss"));
}

TEST_CASE("slice and concat round trip with gradients") {
  auto x = Tensor::from({3, 4}, {0, 1, 2,  3, 4, 5,  6, 7, 8, 9, 10, 11})
               .set_requires_grad();
  auto left = slice(x, 1, 0, 2);
  auto right = slice(x, 1, 2, 2);
  auto back = concat({left, right}, 1);
  CHECK(back.values() == x.values());
  backward(sum(back * 3.0));
  auto gx = x.grad();
  for (double g : gx.values()) CHECK(g == 3.0);

  auto top = slice(x, 0, 0, 1);
  auto bottom = slice(x, 0, 1, 2);
  auto stacked = concat({top, bottom}, 0);
  CHECK(stacked.values() == x.values());
}

TEST_CASE("reshape preserves values and routes gradients") {
  auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}).set_requires_grad();
  auto flat = reshape(x, {6});
  CHECK(flat.at(5) == 6.0);
  backward(sum(square(flat)));
  CHECK(x.grad().at(1, 2) == 12.0);
}

TEST_CASE("no-grad evaluation records nothing") {
  auto x = Tensor::from({2}, {1.0, 2.0}).set_requires_grad();
  NoGradGuard guard;
  auto y = sum(square(x));
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("forward determinism is bit exact") {
  Rng a(99), b(99);
  auto xa = Tensor::from({16}, a.normal_vector(16));
  auto xb = Tensor::from({16}, b.normal_vector(16));
  auto f = [](const Tensor& t) {
    return sigmoid(rgdno::tanh(t * 1.7) + rgdno::sqrt(square(t) + 1.0));
  };
  auto ya = f(xa);
  auto yb = f(xb);
  CHECK(ya.values() == yb.values());
}

TEST_CASE("clamp_min_soft approaches hard clamp for sharp slopes") {
  auto x = Tensor::from({2}, {-1.0, 2.0});
  auto y = clamp_min_soft(x, 0.0, 200.0);
  CHECK(y.at(0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(y.at(1) == doctest::Approx(2.0).epsilon(1e-6));
}
