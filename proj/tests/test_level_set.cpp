#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "pcap/level_set.hpp"
#include "pcap/params.hpp"
#include "pcap/pde_solver.hpp"

using namespace pcap;

namespace {

ScalarField radial_field(int cells, double half_width, const Params& mp,
                         double radius = 1.0, const Vec& center = Vec(0, 0)) {
  const GridSpec g = make_grid_centered(2, Vec(0, 0), half_width, cells);
  return radial_solution(center, radius, mp, g);
}

}  // namespace

TEST_CASE("radial field level set is the predicted ball (q_rad = 1)") {
  const Params mp = make_params(2, 1.5);  // u = 1/r
  const ScalarField u = radial_field(512, 8.0, mp);
  auto dirs = make_direction_grid(2, 512);
  const ConvexBody lvl = level_set_extract(u, 0.5, dirs);
  // {1/r >= 0.5} is the disk of radius 2
  const double h = u.grid.spacing();
  for (int i = 0; i < dirs->count(); ++i) {
    CHECK(std::abs(lvl.support_at(i) - 2.0) <= 2.0 * h);
  }
  const HomothetyFit fit = homothety_fit(make_ball(Vec(0, 0), 2.0, dirs), lvl);
  CHECK(fit.residual <= 2.0 * h);
  // quadratic crossing refinement keeps the radius much tighter than h
  CHECK(std::abs(circumradius(lvl, Vec(0, 0)) - 2.0) < 0.2 * h);
}

TEST_CASE("steeper radial decay (q_rad = 3) at t = 0.125") {
  const Params mp = make_params(3, 1.5);  // q = 3; evaluate on a 2-d slice
  // build the 2-d field u = (R/r)^3 by direct sampling
  const GridSpec g = make_grid_centered(2, Vec(0, 0), 8.0, 512);
  ScalarField u = sample_field(g, [&](const Vec& x) {
    const double r = std::max(norm(x), 1e-12);
    return std::min(1.0, std::pow(1.0 / r, mp.q_rad));
  });
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (norm(g.node_pos(i, j)) <= 1.0) {
        u.mask[g.node_index(i, j)] = NodeTag::InsideBody;
        u.values[g.node_index(i, j)] = 1.0;
      }
    }
  }
  auto dirs = make_direction_grid(2, 512);
  // r = t^(-1/3) = 2 at t = 0.125
  const ConvexBody lvl = level_set_extract(u, 0.125, dirs);
  CHECK(std::abs(circumradius(lvl, Vec(0, 0)) - 2.0) <= 2.0 * g.spacing());
  CHECK(std::abs(inradius(lvl, Vec(0, 0)) - 2.0) <= 2.0 * g.spacing());
}

TEST_CASE("level out of range / touching the box is rejected") {
  const Params mp = make_params(2, 1.5);
  const ScalarField u = radial_field(256, 8.0, mp);
  auto dirs = make_direction_grid(2, 512);
  CHECK_THROWS(level_set_extract(u, 1.0, dirs));
  CHECK_THROWS(level_set_extract(u, 1.5, dirs));
  // t = 0.12 -> radius 8.3 > box: unresolvable
  CHECK_THROWS(level_set_extract(u, 0.12, dirs));
  // nearly touching: radius 7.7 is within two cells of the box corothers
  CHECK_THROWS(level_set_extract(u, 1.0 / 7.95, dirs));
}

TEST_CASE("off-center radial field extracts a translated ball") {
  const Params mp = make_params(2, 1.5);
  const ScalarField u = radial_field(512, 8.0, mp, 1.0, Vec(1, -0.5));
  auto dirs = make_direction_grid(2, 512);
  const ConvexBody lvl = level_set_extract(u, 0.4, dirs);
  const HomothetyFit fit =
      homothety_fit(make_ball(Vec(1, -0.5), 2.5, dirs), lvl);
  CHECK(fit.residual <= 2.0 * u.grid.spacing());
  CHECK(fit.rho == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("geometric level grids") {
  const auto t = geometric_levels(0.1, 0.9, 17);
  CHECK(t.size() == 17);
  CHECK(t.front() == doctest::Approx(0.1));
  CHECK(t.back() == doctest::Approx(0.9));
  for (std::size_t i = 1; i < t.size(); ++i) {
    CHECK(t[i] > t[i - 1]);
    if (i >= 2) {
      CHECK(t[i] / t[i - 1] == doctest::Approx(t[i - 1] / t[i - 2]).epsilon(1e-9));
    }
  }
  CHECK_THROWS(geometric_levels(0.0, 0.9, 5));
  CHECK_THROWS(geometric_levels(0.5, 0.4, 5));
}

TEST_CASE("extraction in 3-d is out of scope for grids") {
  const Params mp = make_params(3, 2.0);
  const GridSpec g = make_grid_centered(3, Vec(0, 0, 0), 6.0, 32);
  const ScalarField u = radial_solution(Vec(0, 0, 0), 1.0, mp, g);
  auto dirs = make_direction_grid(3, 128);
  CHECK_THROWS(level_set_extract(u, 0.5, dirs));
}
