#pragma once

#include <memory>
#include <vector>

#include "pcap/geometry.hpp"
#include "pcap/grid.hpp"

namespace pcap {

/// Points where the {u = t} contour crosses grid lines, located by linear
/// interpolation with a quadratic (three-node) refinement where the
/// neighbouring nodes allow it. n=2 grids only.
std::vector<Vec> extract_level_points(const ScalarField& u, double t);

/// Superlevel-set body {u >= t}: contour points -> convex hull -> support
/// samples. Throws when the level is not strictly inside the resolvable
/// range or the contour comes within two cells of the truncation box.
ConvexBody level_set_extract(const ScalarField& u, double t,
                             std::shared_ptr<const DirectionGrid> dirs);

/// Geometrically spaced levels in [lo, hi], increasing.
std::vector<double> geometric_levels(double lo, double hi, int count);

}  // namespace pcap
