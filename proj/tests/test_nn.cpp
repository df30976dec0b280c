#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "scarfcn/error.hpp"
#include "scarfcn/nn.hpp"

using namespace scarfcn;
using namespace scarfcn::nn;

namespace {

// Central difference of f along v[i].
template <class F>
double central(F&& f, std::span<double> v, std::size_t i, double h = 1e-5) {
  const double keep = v[i];
  v[i] = keep + h;
  const double up = f();
  v[i] = keep - h;
  const double down = f();
  v[i] = keep;
  return (up - down) / (2.0 * h);
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

}  // namespace

TEST_CASE("conv2d forward matches direct loops") {
  std::mt19937_64 g(1);
  for (int t = 0; t < 100; ++t) {
    const auto l = oracle::random_layer(g, false);
    const auto x = oracle::random_input(g, l);
    const auto fast = conv2d_forward(x, l);
    const auto slow = oracle::conv2d(x, l);
    REQUIRE(fast.item_shape() == slow.item_shape());
    CHECK(oracle::max_abs_diff(fast.data(), slow.data()) <= 1e-12);
  }
}

TEST_CASE("transpose conv forward matches direct loops") {
  std::mt19937_64 g(2);
  for (int t = 0; t < 100; ++t) {
    const auto l = oracle::random_layer(g, true);
    const auto x = oracle::random_input(g, l);
    const auto fast = convtranspose2d_forward(x, l);
    const auto slow = oracle::conv_transpose2d(x, l);
    REQUIRE(fast.item_shape() == slow.item_shape());
    CHECK(oracle::max_abs_diff(fast.data(), slow.data()) <= 1e-12);
  }
}

TEST_CASE("conv and transpose backward match finite differences") {
  std::mt19937_64 g(3);
  for (int t = 0; t < 20; ++t) {
    const bool tr = t % 2 == 1;
    auto l = oracle::random_layer(g, tr);
    auto x = oracle::random_input(g, l);
    BatchTensor up(x.batch(), l.output_shape(x.item_shape()));
    oracle::fill_uniform(up.data(), g);
    auto loss = [&] { return oracle::dot(layer_forward(x, l).data(), up.data()); };
    const GradientBundle gb = layer_backward(x, l, up);
    double worst = 0.0;
    for (std::size_t i = 0; i < l.weights.size(); ++i) {
      worst = std::max(worst, rel(gb.weights[i], central(loss, std::span<double>(l.weights), i)));
    }
    for (std::size_t i = 0; i < l.bias.size(); ++i) {
      worst = std::max(worst, rel(gb.bias[i], central(loss, std::span<double>(l.bias), i)));
    }
    for (std::size_t i = 0; i < x.data().size(); ++i) {
      worst = std::max(worst, rel(gb.input.data()[i], central(loss, x.data(), i)));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("input gradient is the adjoint of the forward map") {
  std::mt19937_64 g(4);
  for (int t = 0; t < 50; ++t) {
    auto l = oracle::random_layer(g, t % 2 == 1);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
    const auto x = oracle::random_input(g, l);
    BatchTensor y(x.batch(), l.output_shape(x.item_shape()));
    oracle::fill_uniform(y.data(), g);
    const double lhs = oracle::dot(layer_forward(x, l).data(), y.data());
    const double rhs = oracle::dot(x.data(), layer_backward(x, l, y).input.data());
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("transpose conv is the adjoint of conv with shared weights") {
  std::mt19937_64 g(5);
  auto c = ConvLayerParams::conv(3, 4, 3, 3, 2, 2, 1, 1);
  oracle::fill_uniform(c.weights, g);
  auto t = ConvLayerParams::transpose(4, 3, 3, 3, 2, 2, 1, 1);
  t.weights = c.weights;
  BatchTensor x(2, {3, 5, 7});
  oracle::fill_uniform(x.data(), g);
  const auto cx = conv2d_forward(x, c);
  BatchTensor y(2, cx.item_shape());
  oracle::fill_uniform(y.data(), g);
  const auto ty = convtranspose2d_forward(y, t);
  REQUIRE(ty.item_shape() == x.item_shape());
  CHECK(oracle::dot(cx.data(), y.data()) == doctest::Approx(oracle::dot(x.data(), ty.data())).epsilon(1e-12));
}

TEST_CASE("layer shape errors name both shapes") {
  const auto l = ConvLayerParams::conv(2, 4, 3, 3);
  BatchTensor x(1, {3, 5, 5});
  try {
    conv2d_forward(x, l);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(3,5,5)") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d_forward(BatchTensor(1, {2, 1, 1}), l), ShapeError);
  CHECK_THROWS_AS(ConvLayerParams::conv(0, 1, 1, 1), ShapeError);
}

TEST_CASE("weighted BCE values") {
  SUBCASE("zero logit") {
    const std::vector<double> z{0.0}, one{1.0}, zero{0.0};
    CHECK(weighted_bce_logits(z, one, 1.0).loss == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    CHECK(weighted_bce_logits(z, one, 10.0).loss == doctest::Approx(10 * std::numbers::ln2).epsilon(1e-15));
    CHECK(weighted_bce_logits(z, zero, 10.0).loss == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  }
  SUBCASE("agrees with the textbook formula and its derivative") {
    std::mt19937_64 g(6);
    std::vector<double> z(40), y(40);
    oracle::fill_uniform(z, g, -6, 6);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(g() % 2);
    for (double w : {1.0, 3.0, 10.0}) {
      const auto r = weighted_bce_logits(z, y, w);
      CHECK(r.loss == doctest::Approx(oracle::naive_bce(z, y, w)).epsilon(1e-12));
      for (std::size_t i = 0; i < z.size(); ++i) {
        auto f = [&] { return oracle::naive_bce(z, y, w); };
        CHECK(r.grad[i] == doctest::Approx(central(f, std::span<double>(z), i)).epsilon(1e-6));
      }
    }
  }
  SUBCASE("stable at extreme logits") {
    const std::vector<double> z{800.0, -800.0}, y{0.0, 1.0};
    const auto r = weighted_bce_logits(z, y, 2.0);
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss == doctest::Approx((800.0 + 2.0 * 800.0) / 2.0));
  }
  SUBCASE("rejects non-binary targets") {
    const std::vector<double> z{0.0}, y{0.5};
    CHECK_THROWS_AS(weighted_bce_logits(z, y, 1.0), InputError);
  }
}

TEST_CASE("Adam first step moves each parameter by about lr") {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> gr{0.5, -3.0, 1e-3};
  AdamState st;
  adam_step(p, gr, st, {}, 1, "test");
  CHECK(p[0] == doctest::Approx(0.999).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(-1.999).epsilon(1e-9));
  CHECK(p[2] == doctest::Approx(0.499).epsilon(1e-7));
}

TEST_CASE("Adam second step follows the bias-corrected moments") {
  std::vector<double> p{0.0};
  AdamState st;
  AdamConfig cfg;
  adam_step(p, std::vector<double>{1.0}, st, cfg, 1, "x");
  adam_step(p, std::vector<double>{-1.0}, st, cfg, 2, "x");
  const double m = (0.9 * 0.1 - 0.1) / (1 - 0.81);
  const double v = (0.999 * 0.001 + 0.001) / (1 - 0.999 * 0.999);
  CHECK(p[0] == doctest::Approx(-0.001 - 0.001 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-7));
}

TEST_CASE("optimizers reject non-finite gradients and name the layer") {
  std::vector<double> p{1.0};
  AdamState st;
  try {
    adam_step(p, std::vector<double>{NAN}, st, {}, 1, "conv2");
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("conv2") != std::string::npos);
  }
  CHECK(p[0] == 1.0);
  CHECK_THROWS_AS(sgd_step(p, std::vector<double>{INFINITY}, 0.1, "x"), TrainingError);
  sgd_step(p, std::vector<double>{2.0}, 0.1, "x");
  CHECK(p[0] == doctest::Approx(0.8));
}

TEST_CASE("He-uniform init stays in bounds with zero bias") {
  auto l = ConvLayerParams::conv(8, 16, 3, 3);
  init_layer(l, 7);
  const double bound = std::sqrt(6.0 / 72.0);
  for (double w : l.weights) CHECK(std::abs(w) <= bound);
  for (double b : l.bias) CHECK(b == 0.0);
  auto l2 = ConvLayerParams::conv(8, 16, 3, 3);
  init_layer(l2, 7);
  CHECK(l == l2);
}

TEST_CASE("relu and its backward") {
  std::vector<double> x{-1.0, 0.0, 2.0};
  const std::vector<double> orig = x;
  relu_inplace(x);
  CHECK(x == std::vector<double>{0.0, 0.0, 2.0});
  std::vector<double> gr{5.0, 5.0, 5.0};
  relu_backward_inplace(orig, gr);
  CHECK(gr == std::vector<double>{0.0, 0.0, 5.0});
}

TEST_CASE("grad_check reports the worst coordinate") {
  std::vector<double> v{1.0, 2.0};
  const std::vector<double> good{2.0, 4.0}, bad{2.0, 5.0};
  auto f = [&] { return v[0] * v[0] + v[1] * v[1]; };
  GradCheckTarget t1{"w", v, good, {}};
  CHECK(grad_check(f, std::span<GradCheckTarget>(&t1, 1)).max_rel_error < 1e-8);
  GradCheckTarget t2{"w", v, bad, {}};
  const auto rep = grad_check(f, std::span<GradCheckTarget>(&t2, 1));
  CHECK(rep.worst_index == 1);
  CHECK(rep.max_rel_error == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(v == std::vector<double>{1.0, 2.0});
}
