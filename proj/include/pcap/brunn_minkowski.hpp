#pragma once

#include "pcap/capacity.hpp"
#include "pcap/geometry.hpp"
#include "pcap/pde_solver.hpp"

namespace pcap {

struct BMReport {
  double lambda = 0.0;
  /// Cap^(1/(n-p)) of the Minkowski combination, and the convex combination
  /// of the inputs' Cap^(1/(n-p)).
  double lhs = 0.0;
  double rhs = 0.0;
  double deficit = 0.0;  // lhs - rhs; >= 0 up to numerics (Brunn-Minkowski)
  HomothetyFit homothety;  // fit of K2 against K1
  CapacityEstimate cap1, cap2, cap_comb;       // ENERGY estimates
  CapacityEstimate asym1, asym2, asym_comb;    // cross-checks
  /// 3 x propagated estimator disagreement, in deficit units. The
  /// nonnegativity margin: deficit >= -tolerance on every pair.
  double tolerance = 0.0;
  /// Sharper floor for equality-vs-strict discrimination. The common
  /// multiplicative bias of the three solves cancels in the deficit, so
  /// only the spread of the per-body ENERGY/ASYMPTOTIC ratios enters.
  double equality_floor = 0.0;
  bool endpoint = false;  // lambda in {0,1}: combination equals an input
};

/// Relative error assigned to a capacity estimate pair: the ENERGY vs
/// ASYMPTOTIC disagreement, floored at 0.2% (solver reproducibility floor,
/// measured on ball controls).
double capacity_rel_indicator(const CapacityEstimate& energy,
                              const CapacityEstimate& asym);

/// Three exterior solves (K1, K2, their lambda-combination) on boxes of a
/// common half-width centered per body. Endpoint lambdas reuse the input
/// solves, making the deficit exactly zero by construction.
BMReport bm_deficit(const ConvexBody& k1, const ConvexBody& k2, double lambda,
                    const SolverConfig& proto, int workers = 1);

/// Lambda sweep sharing the two input solves; one combination solve per
/// interior lambda. Equivalent to bm_deficit applied per lambda.
std::vector<BMReport> bm_sweep(const ConvexBody& k1, const ConvexBody& k2,
                               std::span<const double> lambdas,
                               const SolverConfig& proto, int workers = 1);

}  // namespace pcap
