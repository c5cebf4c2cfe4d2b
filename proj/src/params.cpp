#include "pcap/params.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pcap {

Params make_params(int n, double p) {
  if (n != 2 && n != 3) {
    throw std::invalid_argument("make_params: n must be 2 or 3, got " +
                                std::to_string(n));
  }
  if (!(p > 1.0) || !(p < static_cast<double>(n))) {
    throw std::invalid_argument("make_params: need 1 < p < n, got p=" +
                                std::to_string(p) + ", n=" + std::to_string(n));
  }
  Params mp;
  mp.n = n;
  mp.p = p;
  mp.q_rad = (static_cast<double>(n) - p) / (p - 1.0);
  mp.alpha_star = (1.0 - p) / (static_cast<double>(n) - p);
  mp.omega_n = (n == 2) ? std::numbers::pi : 4.0 * std::numbers::pi / 3.0;
  mp.c_np = static_cast<double>(n) * mp.omega_n * std::pow(mp.q_rad, p - 1.0);
  return mp;
}

}  // namespace pcap
