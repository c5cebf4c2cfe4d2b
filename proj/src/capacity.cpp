#include "pcap/capacity.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "pcap/parallel.hpp"

namespace pcap {

namespace {

// Exit distance of the ray center + s*dir from the axis-aligned box.
double ray_box_exit(const GridSpec& box, const Vec& center, const Vec& dir) {
  double t = std::numeric_limits<double>::infinity();
  for (int d = 0; d < box.dim; ++d) {
    if (dir[d] > 1e-15) {
      t = std::min(t, (box.hi[d] - center[d]) / dir[d]);
    } else if (dir[d] < -1e-15) {
      t = std::min(t, (box.lo[d] - center[d]) / dir[d]);
    }
  }
  return t;
}

}  // namespace

double truncation_tail(const GridSpec& box, const Vec& center, double coeff,
                       const Params& mp) {
  if (!(coeff > 0.0) || !std::isfinite(coeff)) return 0.0;
  const double q = mp.q_rad;
  const double beta = mp.p * (q + 1.0);  // |grad u|^p ~ (qC)^p r^(-beta)
  const double n = static_cast<double>(mp.n);
  const double amp = std::pow(q * coeff, mp.p);
  double integral = 0.0;
  if (mp.n == 2) {
    const int m = 8192;
    for (int k = 0; k < m; ++k) {
      const double phi = 2.0 * std::numbers::pi * (k + 0.5) / m;
      const Vec dir(std::cos(phi), std::sin(phi));
      const double rho = ray_box_exit(box, center, dir);
      integral += std::pow(rho, n - beta);
    }
    integral *= 2.0 * std::numbers::pi / m / (beta - n);
  } else {
    const int m = 20000;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < m; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / m;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * k;
      const Vec dir(r * std::cos(phi), r * std::sin(phi), z);
      const double rho = ray_box_exit(box, center, dir);
      integral += std::pow(rho, n - beta);
    }
    integral *= 4.0 * std::numbers::pi / m / (beta - n);
  }
  return amp * integral;
}

CapacityEstimate capacity_energy(const SolveReport& report, const Params& mp) {
  if (!report.converged) {
    throw std::invalid_argument("capacity_energy: unconverged solve rejected");
  }
  CapacityEstimate est;
  est.method = CapacityMethod::Energy;
  est.error_indicator = report.field.grid.spacing();
  double value = discrete_p_energy(report.field, mp.p);
  if (report.farfield_mode == FarfieldMode::AsymptoticDirichlet) {
    if (std::isfinite(report.farfield_residual) && report.farfield_coeff > 0.0) {
      value += truncation_tail(report.field.grid, report.farfield_center,
                               report.farfield_coeff, mp);
    } else {
      est.reliable = false;
    }
  }
  est.value = value;
  return est;
}

CapacityEstimate capacity_asymptotic(const SolveReport& report,
                                     const Params& mp) {
  if (!report.converged) {
    throw std::invalid_argument(
        "capacity_asymptotic: unconverged solve rejected");
  }
  CapacityEstimate est;
  est.method = CapacityMethod::Asymptotic;
  est.error_indicator = report.farfield_residual;
  est.reliable = std::isfinite(report.farfield_residual) &&
                 report.farfield_residual < 0.05 && report.farfield_coeff > 0.0;
  est.value = mp.c_np * std::pow(std::max(report.farfield_coeff, 0.0), mp.p - 1.0);
  return est;
}

CapacityEstimate capacity_ball_exact(double radius, const Params& mp) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("capacity_ball_exact: radius must be positive");
  }
  CapacityEstimate est;
  est.method = CapacityMethod::ExactBall;
  est.error_indicator = 0.0;
  est.value = mp.c_np * std::pow(radius, static_cast<double>(mp.n) - mp.p);
  return est;
}

ScalingReport scaling_check(const SolveReport& base,
                            const SolverConfig& base_cfg,
                            std::span<const double> levels,
                            std::shared_ptr<const DirectionGrid> dirs,
                            int workers) {
  const Params& mp = base_cfg.params;
  ScalingReport out;
  const CapacityEstimate cap_base = capacity_energy(base, mp);
  out.cap_base = cap_base.value;
  const double tail_base =
      base.farfield_mode == FarfieldMode::AsymptoticDirichlet
          ? truncation_tail(base.field.grid, base.farfield_center,
                            base.farfield_coeff, mp)
          : 0.0;
  const double base_hw =
      0.5 * (base.field.grid.hi[0] - base.field.grid.lo[0]);

  auto run_level = [&](double t) -> ScalingEntry {
    ScalingEntry e;
    e.t = t;
    if (t == 1.0) {
      e.ratio_resolve = 1.0;  // the level set is the body itself
      e.ratio_rescale = 1.0;
      e.note = "identity level";
      return e;
    }
    ConvexBody body_t;
    try {
      body_t = level_set_extract(base.field, t, dirs);
    } catch (const std::exception& ex) {
      e.skipped = true;
      e.note = ex.what();
      return e;
    }
    // rescaling identity: Cap(level set) = t^-p (energy below t + tail)
    const double e_below = discrete_p_energy(base.field, mp.p, 0.0, t);
    const double cap_rescale = std::pow(t, -mp.p) * (e_below + tail_base);
    e.ratio_rescale = cap_rescale * std::pow(t, mp.p - 1.0) / out.cap_base;
    // fresh solve on a scale-similar box
    SolverConfig cfg = base_cfg;
    const double growth = std::pow(t, -1.0 / mp.q_rad);
    const Vec c = support_center(body_t);
    double hw = base_hw * growth;
    hw = std::max(hw, 5.2 * circumradius(body_t, c));
    cfg.grid = make_grid_centered(mp.n, c, hw, base_cfg.grid.cells[0]);
    try {
      const SolveReport rep = solve_exterior(body_t, cfg);
      const CapacityEstimate cap_t = capacity_energy(rep, mp);
      e.ratio_resolve =
          cap_t.value * std::pow(t, mp.p - 1.0) / out.cap_base;
    } catch (const std::exception& ex) {
      e.skipped = true;
      e.note = std::string("re-solve failed: ") + ex.what();
      return e;
    }
    e.route_discrepancy = std::abs(e.ratio_resolve - e.ratio_rescale);
    return e;
  };

  out.entries.resize(levels.size());
  parallel_for_indexed(workers, levels.size(), [&](std::size_t i) {
    out.entries[i] = run_level(levels[i]);
  });
  return out;
}

}  // namespace pcap
