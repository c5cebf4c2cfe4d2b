#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "pcap/geometry.hpp"

using namespace pcap;

namespace {

std::shared_ptr<const DirectionGrid> dirs512() {
  static auto d = make_direction_grid(2, 512);
  return d;
}

ConvexBody random_body(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> r(0.3, 2.5);
  if (kind(rng) == 0) {
    return make_ball(Vec(u(rng), u(rng)), r(rng), dirs512());
  }
  std::uniform_int_distribution<int> nv(3, 9);
  std::vector<Vec> pts;
  const int count = nv(rng);
  for (int i = 0; i < count + 3; ++i) pts.emplace_back(u(rng), u(rng));
  try {
    return make_polygon(pts, dirs512());
  } catch (const std::invalid_argument&) {
    return make_ball(Vec(u(rng), u(rng)), r(rng), dirs512());
  }
}

}  // namespace

TEST_CASE("make_ball support values") {
  auto d = dirs512();
  const ConvexBody b0 = make_ball(Vec(0, 0), 1.0, d);
  for (double h : b0.support) CHECK(h == doctest::Approx(1.0).epsilon(1e-15));

  const ConvexBody b1 = make_ball(Vec(1, 0), 2.0, d);
  CHECK(b1.support[0] == doctest::Approx(3.0));            // theta = (1,0)
  CHECK(b1.support[256] == doctest::Approx(1.0));          // theta = (-1,0)

  const ConvexBody b2 = make_ball(Vec(0, 0), 2.0, d);
  for (int i = 0; i < d->count(); ++i) {
    CHECK(b2.support_at(i) == doctest::Approx(2.0 * b0.support_at(i)));
  }
  CHECK_THROWS_AS(make_ball(Vec(0, 0), 0.0, d), std::invalid_argument);
  CHECK_THROWS_AS(make_ball(Vec(0, 0), -1.0, d), std::invalid_argument);
}

TEST_CASE("make_polygon: square, triangle, hull idempotence") {
  auto d = dirs512();
  const ConvexBody sq = make_polygon(
      {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1)}, d);
  CHECK(sq.support[0] == doctest::Approx(1.0));
  const double diag = std::numbers::sqrt2;
  CHECK(sq.support[64] == doctest::Approx(diag));  // theta = (1,1)/sqrt2

  const ConvexBody tri = make_polygon({Vec(0, 0), Vec(1, 0), Vec(0, 1)}, d);
  CHECK(tri.support[256] == doctest::Approx(0.0).epsilon(1e-12));

  // interior duplicates do not change the body
  const ConvexBody sq2 = make_polygon(
      {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1), Vec(0, 0), Vec(0.5, 0.5),
       Vec(1, 1)},
      d);
  for (int i = 0; i < d->count(); ++i) {
    CHECK(sq2.support_at(i) == doctest::Approx(sq.support_at(i)));
  }
  CHECK_THROWS_AS(make_polygon({Vec(0, 0), Vec(1, 1), Vec(2, 2)}, d),
                  std::invalid_argument);
}

TEST_CASE("minkowski combination endpoints and ball closure") {
  auto d = dirs512();
  const ConvexBody a = make_ball(Vec(0, 0), 1.0, d);
  const ConvexBody b = make_ball(Vec(2, 0), 3.0, d);
  const ConvexBody at0 = minkowski_combination(a, b, 0.0);
  const ConvexBody at1 = minkowski_combination(a, b, 1.0);
  for (int i = 0; i < d->count(); ++i) {
    CHECK(at0.support_at(i) == a.support_at(i));
    CHECK(at1.support_at(i) == b.support_at(i));
  }
  const ConvexBody mid = minkowski_combination(a, b, 0.5);
  const ConvexBody expect = make_ball(Vec(1, 0), 2.0, d);
  for (int i = 0; i < d->count(); ++i) {
    CHECK(mid.support_at(i) == doctest::Approx(expect.support_at(i)));
  }
  // self-combination is the identity on convex bodies
  const ConvexBody self = minkowski_combination(a, a, 0.37);
  for (int i = 0; i < d->count(); ++i) {
    CHECK(self.support_at(i) == doctest::Approx(a.support_at(i)));
  }
  auto other = make_direction_grid(2, 256);
  const ConvexBody c = make_ball(Vec(0, 0), 1.0, other);
  CHECK_THROWS_AS(minkowski_combination(a, c, 0.5), std::invalid_argument);
}

TEST_CASE("scale_translate") {
  auto d = dirs512();
  const ConvexBody sq = make_polygon(
      {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1)}, d);
  const ConvexBody same = scale_translate(sq, 1.0, Vec(0, 0));
  for (int i = 0; i < d->count(); ++i) {
    CHECK(same.support_at(i) == doctest::Approx(sq.support_at(i)));
  }
  const ConvexBody big = scale_translate(sq, 2.0, Vec(0, 0));
  CHECK(big.support[0] == doctest::Approx(2.0));
  const ConvexBody moved = scale_translate(make_ball(Vec(0, 0), 1.0, d), 3.0,
                                           Vec(1, 0));
  const ConvexBody expect = make_ball(Vec(1, 0), 3.0, d);
  for (int i = 0; i < d->count(); ++i) {
    CHECK(moved.support_at(i) == doctest::Approx(expect.support_at(i)));
  }
  CHECK_THROWS_AS(scale_translate(sq, 0.0, Vec(0, 0)), std::invalid_argument);
}

TEST_CASE("homothety_fit recovers exact transforms") {
  auto d = dirs512();
  const ConvexBody a = make_ball(Vec(0, 0), 1.0, d);
  const HomothetyFit self = homothety_fit(a, a);
  CHECK(self.rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(self.xi[0]) < 1e-12);
  CHECK(self.residual < 1e-12);

  const ConvexBody b = make_ball(Vec(1, 0), 2.0, d);
  const HomothetyFit fit = homothety_fit(a, b);
  CHECK(fit.rho == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.xi[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.residual < 1e-11);
}

TEST_CASE("disk vs 2:1 ellipse is far from homothetic") {
  auto d = dirs512();
  const ConvexBody disk = make_ball(Vec(0, 0), 1.0, d);
  const ConvexBody ell = make_ellipse(Vec(0, 0), 2.0, 1.0, d);
  const HomothetyFit fit = homothety_fit(disk, ell);
  // independent oracle: best fit of sqrt(4c^2+s^2) by rho + <xi,theta>;
  // symmetry forces xi ~ 0 and rho = mean support, so the max mismatch is
  // max(2 - rho, rho - 1) evaluated densely.
  double mean = 0.0;
  for (int i = 0; i < d->count(); ++i) mean += ell.support_at(i);
  mean /= d->count();
  double oracle = 0.0;
  for (int i = 0; i < d->count(); ++i) {
    oracle = std::max(oracle, std::abs(ell.support_at(i) - mean));
  }
  CHECK(std::abs(fit.xi[0]) < 1e-10);
  CHECK(fit.residual >= 0.1 * diameter(ell));
  CHECK(fit.residual == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("homothety_fit property: random scale/translate round-trip") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> rho_d(0.2, 4.0);
  std::uniform_real_distribution<double> xi_d(-3.0, 3.0);
  for (int trial = 0; trial < 25; ++trial) {
    const ConvexBody a = random_body(rng);
    const double rho = rho_d(rng);
    const Vec xi(xi_d(rng), xi_d(rng));
    const ConvexBody b = scale_translate(a, rho, xi);
    const HomothetyFit fit = homothety_fit(a, b);
    CHECK(fit.valid);
    CHECK(fit.rho == doctest::Approx(rho).epsilon(1e-9));
    CHECK(fit.residual <= 1e-9 * std::max(1.0, diameter(b)));
  }
}

TEST_CASE("contains: analytic and sampled paths") {
  auto d = dirs512();
  const ConvexBody disk = make_ball(Vec(0, 0), 1.0, d);
  CHECK(contains(disk, Vec(0, 0)));
  CHECK(contains(disk, Vec(1, 0)));
  CHECK_FALSE(contains(disk, Vec(2, 0)));

  const ConvexBody sq = make_polygon(
      {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1)}, d);
  CHECK(contains(sq, Vec(1, 1)));  // corner
  CHECK(contains(sq, Vec(0.999, -0.999)));
  CHECK_FALSE(contains(sq, Vec(1.001, 0)));

  const ConvexBody ell = make_ellipse(Vec(0, 0), 2.0, 1.0, d);
  CHECK(contains(ell, Vec(1.99, 0)));
  CHECK_FALSE(contains(ell, Vec(0, 1.01)));
}

TEST_CASE("contains respects support-wise inclusion") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const ConvexBody a = random_body(rng);
    // inflate the support pointwise: h_b = h_a + 0.2 contains a
    ConvexBody b = a;
    b.exact = std::monostate{};
    for (double& h : b.support) h += 0.2;
    for (int k = 0; k < 200; ++k) {
      const Vec x(u(rng), u(rng));
      if (contains(a, x)) CHECK(contains(b, x));
    }
  }
}

TEST_CASE("support function consistency residual") {
  auto d = dirs512();
  CHECK(support_consistency_residual(make_ball(Vec(0.3, -1), 1.7, d)) <= 1e-8);
  CHECK(support_consistency_residual(make_polygon(
            {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1)}, d)) <= 1e-8);
  CHECK(support_consistency_residual(make_ellipse(Vec(0, 0), 2, 1, d)) <= 1e-8);
  // a spiked support function is not a support function
  ConvexBody bad = make_ball(Vec(0, 0), 1.0, d);
  bad.exact = std::monostate{};
  bad.support[100] += 0.25;
  CHECK(support_consistency_residual(bad) > 1e-3);
}

TEST_CASE("minkowski linearity is exact by construction") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ld(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const ConvexBody a = random_body(rng);
    ConvexBody b = random_body(rng);
    b.dirs = a.dirs;  // same grid object by construction anyway
    const double lambda = ld(rng);
    const ConvexBody c = minkowski_combination(a, b, lambda);
    for (int i = 0; i < a.dirs->count(); ++i) {
      const double expect =
          (1.0 - lambda) * a.support_at(i) + lambda * b.support_at(i);
      CHECK(c.support_at(i) == expect);  // exact, not approximate
    }
  }
}

TEST_CASE("diameter and radii helpers") {
  auto d = dirs512();
  const ConvexBody disk = make_ball(Vec(5, -2), 1.5, d);
  CHECK(diameter(disk) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(circumradius(disk, Vec(5, -2)) == doctest::Approx(1.5));
  CHECK(inradius(disk, Vec(5, -2)) == doctest::Approx(1.5));
  const Vec c = support_center(disk);
  CHECK(c[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(-2.0).epsilon(1e-12));

  const ConvexBody sq = make_polygon(
      {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1)}, d);
  CHECK(diameter(sq) == doctest::Approx(2.0 * std::numbers::sqrt2).epsilon(1e-6));
  CHECK(inradius(sq, support_center(sq)) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("3-d direction grid and ball") {
  auto d3 = make_direction_grid(3, 512);
  for (const Vec& v : d3->dirs) {
    CHECK(std::abs(norm(v) - 1.0) <= 1e-12);
  }
  const ConvexBody ball = make_ball(Vec(0, 0, 1), 2.0, d3);
  const Vec c = support_center(ball);
  CHECK(c[2] == doctest::Approx(1.0));
  CHECK(circumradius(ball, c) == doctest::Approx(2.0));
}
