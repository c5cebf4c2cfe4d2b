#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pcap/capacity.hpp"
#include "pcap/params.hpp"

using namespace pcap;

namespace {

// Quadrature oracle for the radial energy integral
//   Cap = n omega_n integral_R^inf (q R^q r^(-q-1))^p r^(n-1) dr,
// in log-radius (r = R e^tau): the integrand becomes a smooth decaying
// exponential for every admissible (n, p), so Simpson converges cleanly.
double radial_capacity_quadrature(const Params& mp, double R) {
  const double q = mp.q_rad;
  // the integrand carries e^(-q tau); run until that is ~ 1e-10
  const double tau_max = 10.0 * std::numbers::ln10 / q + 5.0;
  const int panels = 40000;
  auto integrand = [&](double tau) {
    const double r = R * std::exp(tau);
    const double grad = q * std::pow(R, q) * std::pow(r, -q - 1.0);
    return std::pow(grad, mp.p) * std::pow(r, static_cast<double>(mp.n)) ;
  };
  double acc = integrand(0.0) + integrand(tau_max);
  for (int i = 1; i < panels; ++i) {
    const double tau = tau_max * i / panels;
    acc += (i % 2 ? 4.0 : 2.0) * integrand(tau);
  }
  acc *= tau_max / (3.0 * panels);
  return mp.n * mp.omega_n * acc;
}

SolverConfig disk_config(const Params& mp, int cells, double hw = 8.0) {
  SolverConfig cfg;
  cfg.params = mp;
  cfg.grid = make_grid_centered(mp.n, Vec(0, 0, 0), hw, cells);
  return cfg;
}

SolveReport oracle_report(const Params& mp, double R, int cells, double hw) {
  SolveReport rep;
  rep.field = radial_solution(Vec(0, 0, 0), R, mp,
                              make_grid_centered(mp.n, Vec(0, 0, 0), hw, cells));
  rep.converged = true;
  rep.energy = discrete_p_energy(rep.field, mp.p);
  rep.farfield_coeff = std::pow(R, mp.q_rad);
  rep.farfield_residual = 0.0;
  rep.farfield_center = Vec(0, 0, 0);
  rep.farfield_mode = FarfieldMode::AsymptoticDirichlet;
  return rep;
}

}  // namespace

TEST_CASE("exact ball capacity against the quadrature oracle") {
  // pins the c_np normalization: the energy integral of the radial solution
  // must equal n omega_n q^(p-1) R^(n-p)
  for (auto [n, p] : {std::pair<int, double>{2, 1.5},
                      {2, 1.25},
                      {3, 2.0},
                      {3, 1.5},
                      {3, 2.5}}) {
    const Params mp = make_params(n, p);
    for (double R : {0.5, 1.0, 2.0}) {
      const double oracle = radial_capacity_quadrature(mp, R);
      const CapacityEstimate exact = capacity_ball_exact(R, mp);
      CHECK(exact.value == doctest::Approx(oracle).epsilon(1e-6));
    }
  }
  const Params a = make_params(3, 2.0);
  CHECK(capacity_ball_exact(1.0, a).value ==
        doctest::Approx(4.0 * std::numbers::pi));
  const Params b = make_params(2, 1.5);
  CHECK(capacity_ball_exact(1.0, b).value ==
        doctest::Approx(2.0 * std::numbers::pi));
  // homogeneity
  CHECK(capacity_ball_exact(2.0, b).value ==
        doctest::Approx(std::pow(2.0, 0.5) * capacity_ball_exact(1.0, b).value));
  CHECK_THROWS(capacity_ball_exact(0.0, b));
}

TEST_CASE("truncation tail closes the radial energy budget") {
  const Params mp = make_params(2, 1.5);
  // discrete box energy of the exact radial field + analytic tail ~ Cap
  const SolveReport rep = oracle_report(mp, 1.0, 512, 8.0);
  const double tail =
      truncation_tail(rep.field.grid, Vec(0, 0), rep.farfield_coeff, mp);
  const double cap = capacity_ball_exact(1.0, mp).value;
  CHECK(tail > 0.05 * cap);  // the tail genuinely matters at this box size
  CHECK(rep.energy + tail == doctest::Approx(cap).epsilon(0.02));
}

TEST_CASE("asymptotic estimator is exact on the radial oracle") {
  const Params mp = make_params(2, 1.5);
  const SolveReport rep = oracle_report(mp, 1.0, 256, 8.0);
  const CapacityEstimate asym = capacity_asymptotic(rep, mp);
  CHECK(asym.value ==
        doctest::Approx(capacity_ball_exact(1.0, mp).value).epsilon(1e-12));
  CHECK(asym.reliable);
}

TEST_CASE("unconverged input is rejected") {
  const Params mp = make_params(2, 1.5);
  SolveReport rep = oracle_report(mp, 1.0, 64, 8.0);
  rep.converged = false;
  CHECK_THROWS(capacity_energy(rep, mp));
  CHECK_THROWS(capacity_asymptotic(rep, mp));
}

TEST_CASE("solved capacities: disk within tolerance, square above disk") {
  const Params mp = make_params(2, 1.5);
  auto dirs = make_direction_grid(2, 256);
  const ConvexBody disk = make_ball(Vec(0, 0), 1.0, dirs);
  const SolveReport disk_rep = solve_exterior(disk, disk_config(mp, 128));
  const CapacityEstimate disk_e = capacity_energy(disk_rep, mp);
  const CapacityEstimate disk_a = capacity_asymptotic(disk_rep, mp);
  const double exact = capacity_ball_exact(1.0, mp).value;
  CHECK(disk_e.value == doctest::Approx(exact).epsilon(0.06));
  CHECK(disk_a.value == doctest::Approx(exact).epsilon(0.06));

  // monotonicity under inclusion: the square [-1,1]^2 contains the disk
  const ConvexBody sq = make_polygon(
      {Vec(1, 1), Vec(-1, 1), Vec(-1, -1), Vec(1, -1)}, dirs);
  const SolveReport sq_rep = solve_exterior(sq, disk_config(mp, 128));
  const CapacityEstimate sq_e = capacity_energy(sq_rep, mp);
  const double slack = 1.0 + 2.0 * std::max(disk_e.error_indicator,
                                            sq_e.error_indicator);
  CHECK(disk_e.value <= sq_e.value * slack);
  CHECK(sq_e.value > disk_e.value);  // strictly bigger body, strictly bigger cap
}

TEST_CASE("dilation homogeneity on proportional grids") {
  const Params mp = make_params(2, 1.5);
  auto dirs = make_direction_grid(2, 256);
  double cap[3];
  int k = 0;
  for (double R : {0.5, 1.0, 2.0}) {
    const ConvexBody disk = make_ball(Vec(0, 0), R, dirs);
    const SolveReport rep = solve_exterior(disk, disk_config(mp, 128, 8.0 * R));
    cap[k++] = capacity_energy(rep, mp).value;
  }
  const double np = 2.0 - 1.5;
  CHECK(cap[1] / cap[0] == doctest::Approx(std::pow(2.0, np)).epsilon(0.03));
  CHECK(cap[2] / cap[1] == doctest::Approx(std::pow(2.0, np)).epsilon(0.03));
}

TEST_CASE("scaling law on the radial oracle") {
  const Params mp = make_params(2, 1.5);
  auto dirs = make_direction_grid(2, 512);
  SolverConfig cfg = disk_config(mp, 128);
  const SolveReport rep = oracle_report(mp, 1.0, 128, 8.0);
  const double levels[2] = {0.4, 0.8};
  const ScalingReport sr = scaling_check(rep, cfg, levels, dirs, 1);
  CHECK(sr.entries.size() == 2);
  for (const ScalingEntry& e : sr.entries) {
    REQUIRE_FALSE(e.skipped);
    CHECK(e.ratio_rescale == doctest::Approx(1.0).epsilon(0.05));
    CHECK(e.ratio_resolve == doctest::Approx(1.0).epsilon(0.05));
  }
  // t = 1 is the identity level
  const double one[1] = {1.0};
  const ScalingReport sr1 = scaling_check(rep, cfg, one, dirs, 1);
  CHECK(sr1.entries[0].ratio_resolve == 1.0);
  CHECK(sr1.entries[0].ratio_rescale == 1.0);
  // unresolvable level is skipped with a note
  const double low[1] = {0.05};
  const ScalingReport sr2 = scaling_check(rep, cfg, low, dirs, 1);
  CHECK(sr2.entries[0].skipped);
  CHECK_FALSE(sr2.entries[0].note.empty());
}

TEST_CASE("rescaling route tracks Eq. ratio at interior levels") {
  // Cap(level t) * t^(p-1) / Cap = 1 exactly in the continuum; the two
  // routes must agree with each other about as well as with 1.
  const Params mp = make_params(2, 1.5);
  auto dirs = make_direction_grid(2, 512);
  auto cfg = disk_config(mp, 256);
  const SolveReport rep = oracle_report(mp, 1.0, 256, 8.0);
  const double levels[1] = {0.5};
  const ScalingReport sr = scaling_check(rep, cfg, levels, dirs, 1);
  REQUIRE_FALSE(sr.entries[0].skipped);
  CHECK(sr.entries[0].route_discrepancy < 0.05);
}
