#pragma once

namespace pcap {

/// Problem exponents together with every constant derived from them.
///
/// Admissible range is n in {2, 3} and 1 < p < n. The radial potential of
/// a ball decays like r^(-q_rad) and is exactly alpha_star-concave, with
/// alpha_star = (1-p)/(n-p) = -1/q_rad. c_np is the capacity of the unit
/// ball, n * omega_n * q_rad^(p-1); the far-field identity
/// Cap_p = c_np * C^(p-1) then agrees with the energy integral on balls
/// (checked against a quadrature oracle in the capacity tests).
struct Params {
  int n = 2;
  double p = 1.5;
  double q_rad = 1.0;
  double alpha_star = -1.0;
  double omega_n = 0.0;
  double c_np = 0.0;
};

/// Builds Params with all derived constants populated.
/// Throws std::invalid_argument unless n in {2,3} and 1 < p < n.
Params make_params(int n, double p);

}  // namespace pcap
