#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "transforms.hpp"

using namespace l2t;
using namespace l2t::testing;

namespace {

const Shape kSmall{3, 16, 16};

std::vector<Image> aux_pool(Shape s, int n) {
  std::vector<Image> pool;
  for (int i = 0; i < n; ++i) pool.push_back(random_image(s, 900 + i));
  return pool;
}

OpCatalog full_catalog(Shape s) { return OpCatalog::build(all_categories(), s, aux_pool(s, 6)); }

// Quadratic test function of the op output: central differences are exact up to rounding.
double quadratic(const Image& y, const Image& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += 0.5 * (y[i] - c[i]) * (y[i] - c[i]) + 0.3 * c[i] * y[i];
  return s;
}

Image quadratic_grad(const Image& y, const Image& c) {
  Image g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = (y[i] - c[i]) + 0.3 * c[i];
  return g;
}

}  // namespace

TEST_CASE("catalog size and grids") {
  const OpCatalog cat = full_catalog(Shape{3, 32, 32});
  CHECK(cat.size() == 100);
  for (int i = 0; i < 10; ++i) {
    CHECK(cat.op(cat.find(Category::kRotate, i)).value == 36.0 * (i + 1));
    CHECK(cat.op(cat.find(Category::kScale, i)).value == std::ldexp(1.0, -(i + 1)));
  }
  CHECK(cat.op(cat.find(Category::kMixup, 0)).value == 0.2);
  CHECK(cat.op(cat.find(Category::kMixup, 9)).value == 0.4);
  std::set<std::pair<int, int>> keys;
  for (std::size_t m = 0; m < cat.size(); ++m) {
    keys.insert({static_cast<int>(cat.op(m).category), cat.op(m).param_index});
  }
  CHECK(keys.size() == 100);
}

TEST_CASE("catalog configuration errors") {
  const std::vector<Category> mix{Category::kMixup};
  CHECK_THROWS_AS(OpCatalog::build(mix, kSmall, {}), ConfigError);
  CHECK_THROWS_AS(OpCatalog::build(std::vector<Category>{}, kSmall, {}), ConfigError);
  const std::vector<Category> twice{Category::kScale, Category::kScale};
  CHECK_THROWS_AS(OpCatalog::build(twice, kSmall, {}), ConfigError);
  const std::vector<Category> two{Category::kScale, Category::kMask};
  CHECK(OpCatalog::build(two, kSmall, {}).size() == 20);
}

TEST_CASE("rotation by 360 degrees is the identity") {
  const OpCatalog cat = full_catalog(kSmall);
  const std::size_t op = cat.find(Category::kRotate, 9);
  const Image x = random_image(kSmall, 1);
  Rng rng(1);
  CHECK(apply_op(cat, op, x, rng).first == x);
  const Image up = random_signed(kSmall, 2);
  const auto [y, trace] = apply_op(cat, op, x, rng);
  CHECK(vjp_op(cat, op, trace, up) == up);
}

TEST_CASE("scale multiplies pixels and its transpose") {
  const OpCatalog cat = full_catalog(kSmall);
  const std::size_t op = cat.find(Category::kScale, 0);
  Rng rng(1);
  const auto [y, trace] = apply_op(cat, op, Image(kSmall, 0.8), rng);
  for (double v : y.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));
  const Image up = random_signed(kSmall, 3);
  const Image g = vjp_op(cat, op, trace, up);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == up[i] * 0.5);
}

TEST_CASE("mask with four blocks zeroes exactly one quadrant") {
  const OpCatalog cat = full_catalog(kSmall);
  const std::size_t op = cat.find(Category::kMask, 0);
  CHECK(cat.op(op).value == 4);
  const Image x = random_image(kSmall, 5);
  std::set<int> seen;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(s);
    const auto [y, trace] = apply_op(cat, op, x, rng);
    REQUIRE(trace.masked_block >= 0);
    REQUIRE(trace.masked_block < 4);
    seen.insert(trace.masked_block);
    const int by = trace.masked_block / 2;
    const int bx = trace.masked_block % 2;
    for (int c = 0; c < 3; ++c) {
      for (int yy = 0; yy < 16; ++yy) {
        for (int xx = 0; xx < 16; ++xx) {
          const bool inside = yy / 8 == by && xx / 8 == bx;
          if (inside) {
            CHECK(y.at(c, yy, xx) == 0.0);
          } else {
            CHECK(y.at(c, yy, xx) == x.at(c, yy, xx));
          }
        }
      }
    }
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("shuffle is a permutation and its VJP is the inverse permutation") {
  const OpCatalog cat = full_catalog(kSmall);
  for (int i = 0; i < 10; ++i) {
    const std::size_t op = cat.find(Category::kShuffle, i);
    Rng rng(i);
    const Image x = random_image(kSmall, 10 + i);
    const auto [y, trace] = apply_op(cat, op, x, rng);
    std::vector<double> a(x.values().begin(), x.values().end());
    std::vector<double> b(y.values().begin(), y.values().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    const Image up = random_signed(kSmall, 30 + i);
    const Image g = vjp_op(cat, op, trace, up);
    // <up, P x> == <P^T up, x> exactly for a permutation
    for (std::size_t p = 0; p < trace.permutation.size(); ++p) {
      CHECK(g[static_cast<std::size_t>(trace.permutation[p])] == up[p]);
    }
  }
}

TEST_CASE("every op preserves shape, replays exactly and matches finite differences") {
  const OpCatalog cat = full_catalog(kSmall);
  for (std::size_t op = 0; op < cat.size(); ++op) {
    CAPTURE(cat.op(op).label());
    Rng rng(op);
    const Image x = random_image(kSmall, 40 + op);
    const auto [y, trace] = apply_op(cat, op, x, rng);
    CHECK(y.shape() == kSmall);
    CHECK(all_finite(y.values()));
    CHECK(replay_op(cat, trace, x) == y);
    const Image c = random_image(kSmall, 80 + op);
    const Image analytic = vjp_op(cat, op, trace, quadratic_grad(y, c));
    const Image numeric =
        finite_diff_grad([&](const Image& im) { return quadratic(replay_op(cat, trace, im), c); }, x, 1e-3);
    CHECK(max_relative_error(analytic, numeric) <= 1e-3);
  }
}

TEST_CASE("a trace from another op is rejected") {
  const OpCatalog cat = full_catalog(kSmall);
  Rng rng(1);
  const auto [y, trace] = apply_op(cat, cat.find(Category::kMask, 0), random_image(kSmall, 1), rng);
  CHECK_THROWS_AS(vjp_op(cat, cat.find(Category::kShuffle, 0), trace, y), InvalidArgument);
}

TEST_CASE("composition order and transposes") {
  const OpCatalog cat = full_catalog(kSmall);
  const Image x = random_image(kSmall, 7);
  const Image up = random_signed(kSmall, 8);

  SUBCASE("K = 1 equals the single op") {
    for (std::size_t op : {cat.find(Category::kSpectrum, 3), cat.find(Category::kPad, 4)}) {
      Rng r1(3);
      Rng r2(3);
      const auto [y1, t1] = apply_op(cat, op, x, r1);
      const auto [y2, t2] = compose_apply(cat, Transformation{{op}}, x, r2);
      CHECK(y1 == y2);
      CHECK(vjp_op(cat, op, t1, up) == compose_vjp(cat, t2, up));
    }
  }
  SUBCASE("two full rotations") {
    const std::size_t r = cat.find(Category::kRotate, 9);
    Rng rng(1);
    const auto [y, t] = compose_apply(cat, Transformation{{r, r}}, x, rng);
    CHECK(y == x);
    CHECK(compose_vjp(cat, t, up) == up);
  }
  SUBCASE("two halvings") {
    const std::size_t s = cat.find(Category::kScale, 0);
    Rng rng(1);
    const auto [y, t] = compose_apply(cat, Transformation{{s, s}}, x, rng);
    const Image g = compose_vjp(cat, t, up);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(y[i] == doctest::Approx(x[i] * 0.25).epsilon(1e-15));
      CHECK(g[i] == doctest::Approx(up[i] * 0.25).epsilon(1e-15));
    }
  }
  SUBCASE("first op is applied first") {
    const std::size_t m = cat.find(Category::kMask, 0);
    const std::size_t t = cat.find(Category::kTranslate, 2);
    Rng rng(5);
    const auto [y, trace] = compose_apply(cat, Transformation{{m, t}}, x, rng);
    REQUIRE(trace.steps.size() == 2);
    CHECK(trace.steps[0].op_index == m);
    CHECK(trace.steps[1].op_index == t);
    const Image expect = replay_op(cat, trace.steps[1], replay_op(cat, trace.steps[0], x));
    CHECK(y == expect);
    CHECK(compose_replay(cat, trace, x) == y);
  }
}

TEST_CASE("ops are homogeneous up to their additive term") {
  const OpCatalog cat = full_catalog(kSmall);
  const Image x = random_image(kSmall, 3);
  const double a = 0.37;
  Image ax = x;
  for (double& v : ax.values()) v *= a;
  const Image zero(kSmall);
  for (Category c : {Category::kMask, Category::kShuffle, Category::kTranslate, Category::kSpectrum,
                     Category::kScale, Category::kMixup}) {
    for (int i : {0, 5, 9}) {
      const std::size_t op = cat.find(c, i);
      CAPTURE(cat.op(op).label());
      Rng rng(i);
      const auto [y, trace] = apply_op(cat, op, x, rng);
      const Image y0 = replay_op(cat, trace, zero);
      const Image ya = replay_op(cat, trace, ax);
      for (std::size_t k = 0; k < x.size(); ++k) {
        CHECK(ya[k] - y0[k] == doctest::Approx(a * (y[k] - y0[k])).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("catalog dump lists every op") {
  const OpCatalog cat = full_catalog(kSmall);
  const std::string j = cat.to_json();
  CHECK(j.find("\"rotate\"") != std::string::npos);
  CHECK(j.find("\"crop\"") != std::string::npos);
  const std::vector<std::size_t> keep{3, 50};
  const OpCatalog sub = cat.subset(keep);
  CHECK(sub.size() == 2);
  CHECK(sub.op(1) == cat.op(50));
}
