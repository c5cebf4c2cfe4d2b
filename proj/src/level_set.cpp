#include "pcap/level_set.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcap {

namespace {

// Crossing parameter in [0,1] between consecutive nodes with values a, b
// (a on side s=0). Quadratic refinement uses the flanking values when both
// are available and smooth (not clamped body nodes).
double crossing_param(double t, double a, double b, bool have_lo, double lo,
                      bool have_hi, double hi) {
  const double lin = (t - a) / (b - a);
  // Fit q(s) = a + c1 s + c2 s^2 through three consecutive nodes, using the
  // triple centred nearest the crossing.
  double c0, c1, c2, base;
  if (lin <= 0.5 && have_lo) {
    // nodes at s = -1, 0, 1
    c0 = a;
    c1 = 0.5 * (b - lo);
    c2 = 0.5 * (b - 2.0 * a + lo);
    base = 0.0;
  } else if (have_hi) {
    // nodes at s = 0, 1, 2 -> local coords around s=1
    c0 = b;
    c1 = 0.5 * (hi - a);
    c2 = 0.5 * (hi - 2.0 * b + a);
    base = 1.0;
  } else if (have_lo) {
    c0 = a;
    c1 = 0.5 * (b - lo);
    c2 = 0.5 * (b - 2.0 * a + lo);
    base = 0.0;
  } else {
    return lin;
  }
  // Solve c0 + c1 y + c2 y^2 = t for y = s - base.
  const double target = t - c0;
  double y;
  if (std::abs(c2) < 1e-14 * (std::abs(c1) + 1e-300)) {
    if (c1 == 0.0) return lin;
    y = target / c1;
  } else {
    const double disc = c1 * c1 + 4.0 * c2 * target;
    if (disc < 0.0) return lin;
    const double sq = std::sqrt(disc);
    const double y1 = (-c1 + sq) / (2.0 * c2);
    const double y2 = (-c1 - sq) / (2.0 * c2);
    const double want = lin - base;
    y = (std::abs(y1 - want) < std::abs(y2 - want)) ? y1 : y2;
  }
  const double s = base + y;
  if (!(s >= -0.25 && s <= 1.25)) return lin;  // refinement went astray
  return std::min(1.0, std::max(0.0, s));
}

}  // namespace

std::vector<Vec> extract_level_points(const ScalarField& u, double t) {
  const GridSpec& g = u.grid;
  if (g.dim != 2) {
    throw std::invalid_argument(
        "extract_level_points: grid extraction is n=2 only");
  }
  const auto [umin, umax] = exterior_range(u);
  if (!(t > umin && t < umax)) {
    throw std::invalid_argument(
        "extract_level_points: level t=" + std::to_string(t) +
        " outside resolvable range (" + std::to_string(umin) + ", " +
        std::to_string(umax) + ")");
  }
  const int nx = g.nx(), ny = g.ny();
  const double h = g.spacing();
  std::vector<Vec> pts;
  auto val = [&](int i, int j) { return u.values[g.node_index(i, j)]; };
  auto inside = [&](int i, int j) {
    return u.mask[g.node_index(i, j)] == NodeTag::InsideBody;
  };
  auto smooth = [&](int i, int j) {
    return i >= 0 && i < nx && j >= 0 && j < ny && !inside(i, j);
  };
  // Horizontal sweeps: crossings on x-edges.
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double a = val(i, j), b = val(i + 1, j);
      if ((a >= t) == (b >= t)) continue;
      const bool lo_ok = smooth(i - 1, j) && !inside(i, j) && !inside(i + 1, j);
      const bool hi_ok = smooth(i + 2, j) && !inside(i, j) && !inside(i + 1, j);
      const double s =
          crossing_param(t, a, b, lo_ok, lo_ok ? val(i - 1, j) : 0.0, hi_ok,
                         hi_ok ? val(i + 2, j) : 0.0);
      pts.emplace_back(g.lo[0] + h * (i + s), g.lo[1] + h * j);
    }
  }
  // Vertical sweeps: crossings on y-edges.
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j + 1 < ny; ++j) {
      const double a = val(i, j), b = val(i, j + 1);
      if ((a >= t) == (b >= t)) continue;
      const bool lo_ok = smooth(i, j - 1) && !inside(i, j) && !inside(i, j + 1);
      const bool hi_ok = smooth(i, j + 2) && !inside(i, j) && !inside(i, j + 1);
      const double s =
          crossing_param(t, a, b, lo_ok, lo_ok ? val(i, j - 1) : 0.0, hi_ok,
                         hi_ok ? val(i, j + 2) : 0.0);
      pts.emplace_back(g.lo[0] + h * i, g.lo[1] + h * (j + s));
    }
  }
  return pts;
}

ConvexBody level_set_extract(const ScalarField& u, double t,
                             std::shared_ptr<const DirectionGrid> dirs) {
  std::vector<Vec> pts = extract_level_points(u, t);
  if (pts.size() < 8) {
    throw std::runtime_error("level_set_extract: level set unresolved at t=" +
                             std::to_string(t));
  }
  const GridSpec& g = u.grid;
  const double margin = 2.0 * g.spacing();
  for (const Vec& p : pts) {
    for (int d = 0; d < g.dim; ++d) {
      if (p[d] < g.lo[d] + margin || p[d] > g.hi[d] - margin) {
        throw std::runtime_error(
            "level_set_extract: level set touches the truncation box at t=" +
            std::to_string(t));
      }
    }
  }
  return body_from_points(pts, std::move(dirs));
}

std::vector<double> geometric_levels(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) {
    throw std::invalid_argument("geometric_levels: need 0 < lo < hi, count >= 2");
  }
  std::vector<double> t(static_cast<std::size_t>(count));
  const double ratio = std::log(hi / lo) / (count - 1);
  for (int k = 0; k < count; ++k) {
    t[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k);
  }
  t.back() = hi;
  return t;
}

}  // namespace pcap
