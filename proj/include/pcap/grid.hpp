#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "pcap/vec.hpp"

namespace pcap {

/// Axis-aligned uniform node grid. `cells` counts cells per axis, so the
/// node count per active axis is cells+1. 2-d grids keep cells[2] == 0 and
/// a single node layer in z.
struct GridSpec {
  int dim = 2;
  Vec lo;
  Vec hi;
  std::array<int, 3> cells{0, 0, 0};

  int nx() const { return cells[0] + 1; }
  int ny() const { return cells[1] + 1; }
  int nz() const { return dim == 3 ? cells[2] + 1 : 1; }
  std::size_t node_count() const {
    return static_cast<std::size_t>(nx()) * static_cast<std::size_t>(ny()) *
           static_cast<std::size_t>(nz());
  }
  std::size_t node_index(int i, int j, int k = 0) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(ny()) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(nx()) +
           static_cast<std::size_t>(i);
  }
  double spacing() const { return (hi[0] - lo[0]) / cells[0]; }
  Vec node_pos(int i, int j, int k = 0) const {
    const double h = spacing();
    Vec x(lo[0] + h * i, lo[1] + h * j);
    if (dim == 3) x[2] = lo[2] + h * k;
    return x;
  }
  bool contains_point(const Vec& x) const {
    for (int d = 0; d < dim; ++d) {
      if (x[d] < lo[d] || x[d] > hi[d]) return false;
    }
    return true;
  }
};

/// Validates and builds a grid. Spacing must be uniform across axes
/// (box extents proportional to cell counts) and cells >= 16 per axis.
GridSpec make_grid(int dim, const Vec& lo, const Vec& hi,
                   const std::array<int, 3>& cells);

/// Cube of half-width L centered at `center`, `n` cells per axis.
GridSpec make_grid_centered(int dim, const Vec& center, double half_width,
                            int cells_per_axis);

enum class NodeTag : std::uint8_t {
  Exterior = 0,
  InsideBody = 1,
  OuterBoundary = 2,
};

/// Grid-sampled potential with a per-node mask. Values at InsideBody nodes
/// are pinned to 1 and everything lives in [0, 1].
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;
  std::vector<NodeTag> mask;
};

/// Samples fn at every node; mask set to Exterior except the box faces,
/// which become OuterBoundary.
ScalarField sample_field(const GridSpec& grid,
                         const std::function<double(const Vec&)>& fn);

/// Multilinear interpolation at x (clamped to the box).
double interpolate(const ScalarField& f, const Vec& x);

/// Min/max of values over Exterior and OuterBoundary nodes.
std::pair<double, double> exterior_range(const ScalarField& f);

/// True if no Exterior node is a strict local extremum against its grid
/// neighbours and all values lie in [-slack, 1+slack].
bool satisfies_maximum_principle(const ScalarField& f, double slack = 1e-12);

}  // namespace pcap
