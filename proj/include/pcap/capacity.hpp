#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcap/level_set.hpp"
#include "pcap/params.hpp"
#include "pcap/pde_solver.hpp"

namespace pcap {

enum class CapacityMethod { Energy, Asymptotic, ExactBall };

struct CapacityEstimate {
  double value = 0.0;
  CapacityMethod method = CapacityMethod::Energy;
  /// grid h for Energy, far-field fit residual for Asymptotic, 0 exact.
  double error_indicator = 0.0;
  bool reliable = true;
};

/// Integral of |grad(C r^-q)|^p over the complement of the box, by angular
/// quadrature of the ray-box exit distance. This is the part of the energy
/// the truncated solve cannot see (~ Cap * u(box) for balls, so it is far
/// from negligible at desk-scale boxes).
double truncation_tail(const GridSpec& box, const Vec& center, double coeff,
                       const Params& mp);

/// Discrete p-energy over the box plus the far-field tail reconstructed
/// from the fitted coefficient (asymptotic mode only; the zero-Dirichlet
/// field genuinely stops at the box). Rejects unconverged input.
CapacityEstimate capacity_energy(const SolveReport& report, const Params& mp);

/// c_np * farfield_coeff^(p-1). Flagged unreliable when the far-field fit
/// residual exceeds 5%.
CapacityEstimate capacity_asymptotic(const SolveReport& report,
                                     const Params& mp);

/// n * omega_n * q_rad^(p-1) * R^(n-p).
CapacityEstimate capacity_ball_exact(double radius, const Params& mp);

struct ScalingEntry {
  double t = 0.0;
  bool skipped = false;
  std::string note;
  /// Cap(extracted body, re-solved) * t^(p-1) / Cap(base).
  double ratio_resolve = 0.0;
  /// Cap via the rescaling identity u_t = u/t on {u < t}, same normalization.
  double ratio_rescale = 0.0;
  double route_discrepancy = 0.0;
};

struct ScalingReport {
  double cap_base = 0.0;
  std::vector<ScalingEntry> entries;
};

/// Checks Cap(level set at t) = t^(1-p) Cap(body) along two independent
/// routes: a fresh exterior solve of the extracted level set on a
/// scale-similar box, and the potential-rescaling identity. Unresolvable
/// levels are skipped with a note.
ScalingReport scaling_check(const SolveReport& base,
                            const SolverConfig& base_cfg,
                            std::span<const double> levels,
                            std::shared_ptr<const DirectionGrid> dirs,
                            int workers = 1);

}  // namespace pcap
