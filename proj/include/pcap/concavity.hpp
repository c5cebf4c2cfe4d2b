#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pcap/geometry.hpp"
#include "pcap/grid.hpp"

namespace pcap {

struct PointwiseAlphaResult {
  double alpha = 0.0;
  std::size_t samples_used = 0;
  std::size_t samples_excluded = 0;
  double excluded_fraction = 0.0;
  Vec argmax_point;  // where the worst ratio v v_tt / v_t^2 lives
};

/// Concavity number by the pointwise formula alpha = 1 - sup v v_theta,theta
/// / v_theta^2, evaluated from central-difference gradients and Hessians at
/// exterior nodes >= `boundary_band` cells from mask transitions and the
/// box. Directions with |v_theta| < delta * mean|grad v| are excluded.
/// sample_nodes (optional) restricts the node set. Throws when nothing
/// survives the exclusions.
PointwiseAlphaResult concavity_number_pointwise(
    const ScalarField& u, const DirectionGrid& dirs, double delta = 1e-3,
    int boundary_band = 3,
    const std::vector<std::size_t>* sample_nodes = nullptr);

/// h[level][direction] = support of {u >= t_level}, extracted per level.
/// Levels whose extraction fails are kept with ok=false so the caller can
/// see exactly what was skipped.
struct SupportMatrix {
  std::shared_ptr<const DirectionGrid> dirs;
  std::vector<double> t_grid;  // strictly increasing
  std::vector<std::vector<double>> h;
  std::vector<std::uint8_t> level_ok;
  std::vector<std::string> notes;

  int valid_levels() const;
};

SupportMatrix support_matrix(const ScalarField& u,
                             std::span<const double> t_grid,
                             std::shared_ptr<const DirectionGrid> dirs);

struct SupportAlphaResult {
  double alpha = 0.0;
  std::size_t samples_used = 0;
  std::size_t samples_excluded = 0;
  double excluded_fraction = 0.0;
  double argmin_t = 0.0;
  int argmin_dir = -1;
};

/// Concavity number from the support matrix: alpha = inf 1 + t h_tt / h_t,
/// with nonuniform 3-point differences in t. Needs >= 5 valid levels;
/// throws when the matrix shows a quasi-concavity violation (h_t > 0 beyond
/// noise), which signals a bad solve.
SupportAlphaResult alpha_from_support(const SupportMatrix& s);

struct MidpointReport {
  double alpha = 0.0;
  std::size_t pairs_evaluated = 0;
  /// max over pairs of (u^a(mid) - avg) / |avg|; positive = convexity broken.
  double worst_violation = 0.0;
  Vec worst_x, worst_y;
  double worst_mid_value = 0.0;  // u at the offending midpoint
  double tolerance = 0.0;
  bool passed = false;
};

/// Random-pair midpoint convexity check of u^alpha (alpha < 0). Pairs are
/// drawn from exterior nodes with u >= floor; midpoints are evaluated by
/// multilinear interpolation and the check allows `rel_tol` of interpolation
/// slack.
MidpointReport midpoint_concavity_test(const ScalarField& u, double alpha,
                                       int pair_count, std::uint64_t rng_seed,
                                       double floor = 0.05,
                                       double rel_tol = 1e-3);

/// Experiment-level summary combining both estimators and the midpoint
/// check. Invalid when more than half of the candidate samples were
/// excluded.
struct ConcavityReport {
  double alpha_pointwise = 0.0;
  double alpha_support = 0.0;
  MidpointReport midpoint;
  std::size_t samples_used = 0;
  double excluded_fraction = 0.0;
  bool valid = true;
};

}  // namespace pcap
