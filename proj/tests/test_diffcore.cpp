#include <doctest.h>

#include <cmath>
#include <limits>

#include "diffcore.hpp"
#include "helpers.hpp"
#include "models.hpp"

using namespace l2t;
using namespace l2t::testing;

namespace {
const Shape kShape{3, 32, 32};
}

TEST_CASE("zero-weight model gives zero logits, ln(C) loss and zero gradient") {
  for (ArchId arch : all_archs()) {
    const ModelWeights m = zero_model(arch, kShape, 10);
    const Image x = random_image(kShape, 3);
    const Logits z = forward(m, x);
    REQUIRE(z.size() == 10);
    for (double v : z) CHECK(v == 0.0);
    const LossGrad lg = loss_and_input_grad(m, x, 4);
    CHECK(lg.loss == doctest::Approx(std::log(10.0)).epsilon(1e-15));
    for (double g : lg.grad.values()) CHECK(g == 0.0);
  }
}

TEST_CASE("forward and gradient are bit-identical on repeated calls") {
  const ModelWeights m = random_model(ArchId::kConvDeep, kShape, 10, 11);
  const Image x = random_image(kShape, 12);
  CHECK(forward(m, x) == forward(m, x));
  const LossGrad a = loss_and_input_grad(m, x, 2);
  const LossGrad b = loss_and_input_grad(m, x, 2);
  CHECK(a.loss == b.loss);
  CHECK(a.grad == b.grad);
}

TEST_CASE("finite_diff_grad on analytic functions") {
  const Image x = random_image(Shape{2, 8, 8}, 5);
  const Image g = finite_diff_grad(
      [](const Image& im) {
        double s = 0.0;
        for (double v : im.values()) s += v;
        return s;
      },
      x, 1e-3);
  for (double v : g.values()) CHECK(std::fabs(v - 1.0) <= 1e-9);

  const Image half(Shape{2, 8, 8}, 0.5);
  const Image q = finite_diff_grad(
      [](const Image& im) {
        double s = 0.0;
        for (double v : im.values()) s += v * v;
        return s;
      },
      half, 1e-3);
  for (double v : q.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("input gradient matches central differences for every architecture") {
  for (ArchId arch : all_archs()) {
    CAPTURE(arch_name(arch));
    const ModelWeights m = random_model(arch, kShape, 10, 100 + static_cast<int>(arch));
    for (int k = 0; k < 2; ++k) {
      const Image x = random_image(kShape, 200 + k);
      const int label = k * 3;
      const GradCheck g = check_model_gradient(m, x, label, 1e-3);
      CHECK(g.max_rel_error <= 1e-3);
      CHECK(g.excluded * 20 < x.size());
      CHECK(g.checked * 2 > x.size());
      // A smaller step needs no exclusions.
      const LossGrad lg = loss_and_input_grad(m, x, label);
      const Image fd = finite_diff_grad([&](const Image& im) { return loss_only(m, im, label); }, x, 1e-6);
      CHECK(relative_error_where(lg.grad, fd, 1e-6) <= 1e-3);
      CHECK(lg.loss == doctest::Approx(loss_only(m, x, label)).epsilon(1e-14));
    }
  }
}

TEST_CASE("relu pattern") {
  const ModelWeights m = random_model(ArchId::kConvSmall, kShape, 10, 1);
  const Image x = random_image(kShape, 2);
  Logits z;
  const std::vector<bool> p = relu_pattern(m, x, &z);
  CHECK(p.size() == 8u * 32 * 32);
  CHECK(z == forward(m, x));
  CHECK(relu_pattern(zero_model(ArchId::kMlp, kShape, 10), x).size() == 64);
}

TEST_CASE("cross entropy and argmax") {
  const std::vector<double> z{1.0, 3.0, 3.0, -2.0};
  CHECK(argmax(z) == 1);
  std::vector<double> d(4);
  const double loss = cross_entropy(z, 2, d);
  double sum = 0.0;
  for (double v : d) sum += v;
  CHECK(std::fabs(sum) < 1e-15);
  CHECK(d[2] < 0.0);
  const double lse = std::log(std::exp(1.0) + 2 * std::exp(3.0) + std::exp(-2.0));
  CHECK(loss == doctest::Approx(lse - 3.0).epsilon(1e-14));
}

TEST_CASE("rejected inputs") {
  const ModelWeights m = random_model(ArchId::kConvSmall, kShape, 10, 1);
  CHECK_THROWS_AS(forward(m, Image(Shape{3, 16, 16})), InvalidArgument);
  CHECK_THROWS_AS(loss_and_input_grad(m, Image(kShape), 10), InvalidArgument);
  CHECK_THROWS_AS(loss_and_input_grad(m, Image(kShape), -1), InvalidArgument);
  Image bad(kShape, 0.5);
  bad[17] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(loss_and_input_grad(m, bad, 0), NumericalError);
  ModelWeights broken = m;
  std::get<Conv2d>(broken.layers[0]).weight[0] = std::numeric_limits<double>::infinity();
  try {
    loss_and_input_grad(broken, Image(kShape, 0.5), 0);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}
