#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pcap/geometry.hpp"
#include "pcap/grid.hpp"
#include "pcap/params.hpp"

namespace pcap {

enum class FarfieldMode { ZeroDirichlet, AsymptoticDirichlet };

struct SolverConfig {
  Params params;
  GridSpec grid;
  /// Gradient regularization, relative to the mean gradient magnitude;
  /// refreshed at the start of every outer cycle.
  double epsilon_reg = 1e-8;
  /// Stop the Picard loop when the relative energy decrease falls below this.
  double tol = 1e-9;
  /// Optional sharper stop: keep iterating until the energy-gradient norm
  /// falls below grad_tol x its initial value (0 disables). Energy
  /// differences bottom out near machine precision long before the iterate
  /// does, so tight node-wise accuracy needs this criterion.
  double grad_tol = 0.0;
  /// Far-field Dirichlet coefficient updates.
  int max_outer = 3;
  /// Picard iterations per outer cycle.
  int max_inner = 500;
  FarfieldMode farfield_mode = FarfieldMode::AsymptoticDirichlet;
  /// Tightest relative residual requested from the inner CG solves.
  double cg_tol_floor = 1e-9;
  int cg_max_iter = 100000;
};

struct SolveReport {
  ScalarField field;
  /// Regularized discrete p-Dirichlet energy over the box.
  double energy = 0.0;
  /// Inf-norm of the discrete divergence-form operator at safe exterior nodes.
  double residual = 0.0;
  int picard_iterations = 0;
  int outer_iterations = 0;
  long cg_iterations = 0;
  /// Fitted C in u ~ C |x - center|^(-q_rad), and the relative fit mismatch.
  double farfield_coeff = 0.0;
  double farfield_residual = 0.0;
  Vec farfield_center;
  FarfieldMode farfield_mode = FarfieldMode::AsymptoticDirichlet;
  bool converged = false;
  /// Accepted energies per Picard step, one sequence per outer cycle.
  /// Non-increasing within each cycle by construction (step damping).
  std::vector<std::vector<double>> energy_history;
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& msg, double last_residual, int iterations)
      : std::runtime_error(msg),
        last_residual(last_residual),
        iterations(iterations) {}
  double last_residual;
  int iterations;
};

/// Minimizes the discrete p-Dirichlet energy with u=1 on the body and
/// far-field Dirichlet data on the truncation box (lagged-diffusivity
/// Picard, damped for monotone energy decrease, PCG inner solves).
/// Throws SolveError on genuine non-convergence or when the body violates
/// the clearance requirement of the box.
SolveReport solve_exterior(const ConvexBody& body, const SolverConfig& cfg);

/// Closed-form ball potential u = (R/|x-c|)^q_rad sampled on a grid.
ScalarField radial_solution(const Vec& center, double radius,
                            const Params& mp, const GridSpec& grid);

double radial_value(const Vec& center, double radius, const Params& mp,
                    const Vec& x);

/// Inf-norm of the discrete divergence-form residual at exterior nodes at
/// least two cells away from mask transitions and the box.
double residual_norm(const ScalarField& field, const Params& mp);

/// Discrete p-energy sum_cells sum_corners (h^n/2^n) (|g|^2+eps2)^(p/2),
/// restricted to corners whose nodal value is < below_level.
double discrete_p_energy(const ScalarField& field, double p, double eps2 = 0.0,
                         double below_level = 2.0);

/// Exterior nodes >= band cells (Chebyshev) away from body nodes and the
/// outer box; 1 marks a safe node.
std::vector<std::uint8_t> nodes_away_from_transitions(const ScalarField& field,
                                                      int band);

/// Box centered at the body's support center. half_width <= 0 picks
/// 5.2 x circumradius, the smallest box honoring the clearance rule.
GridSpec auto_grid_for_body(const ConvexBody& body, int cells,
                            double half_width = 0.0);

}  // namespace pcap
