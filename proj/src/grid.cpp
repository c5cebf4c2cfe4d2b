#include "pcap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pcap {

GridSpec make_grid(int dim, const Vec& lo, const Vec& hi,
                   const std::array<int, 3>& cells) {
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("make_grid: dim must be 2 or 3");
  }
  GridSpec g;
  g.dim = dim;
  g.lo = lo;
  g.hi = hi;
  g.cells = cells;
  if (dim == 2) g.cells[2] = 0;
  double h = 0.0;
  for (int d = 0; d < dim; ++d) {
    if (g.cells[d] < 16) {
      throw std::invalid_argument("make_grid: need >= 16 cells per axis");
    }
    const double ext = hi[d] - lo[d];
    if (!(ext > 0.0)) {
      throw std::invalid_argument("make_grid: empty box extent on axis " +
                                  std::to_string(d));
    }
    const double hd = ext / g.cells[d];
    if (d == 0) {
      h = hd;
    } else if (std::abs(hd - h) > 1e-12 * h) {
      throw std::invalid_argument("make_grid: spacing must be uniform across axes");
    }
  }
  return g;
}

GridSpec make_grid_centered(int dim, const Vec& center, double half_width,
                            int cells_per_axis) {
  Vec lo = center, hi = center;
  for (int d = 0; d < dim; ++d) {
    lo[d] -= half_width;
    hi[d] += half_width;
  }
  std::array<int, 3> cells{cells_per_axis, cells_per_axis,
                           dim == 3 ? cells_per_axis : 0};
  return make_grid(dim, lo, hi, cells);
}

ScalarField sample_field(const GridSpec& grid,
                         const std::function<double(const Vec&)>& fn) {
  ScalarField f;
  f.grid = grid;
  f.values.resize(grid.node_count());
  f.mask.assign(grid.node_count(), NodeTag::Exterior);
  const int nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = grid.node_index(i, j, k);
        f.values[id] = fn(grid.node_pos(i, j, k));
        const bool face = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 ||
                          (grid.dim == 3 && (k == 0 || k == nz - 1));
        if (face) f.mask[id] = NodeTag::OuterBoundary;
      }
    }
  }
  return f;
}

double interpolate(const ScalarField& f, const Vec& x) {
  const GridSpec& g = f.grid;
  const double h = g.spacing();
  double s[3] = {0, 0, 0};
  int base[3] = {0, 0, 0};
  for (int d = 0; d < g.dim; ++d) {
    double t = (x[d] - g.lo[d]) / h;
    t = std::clamp(t, 0.0, static_cast<double>(g.cells[d]));
    base[d] = std::min(static_cast<int>(t), g.cells[d] - 1);
    s[d] = t - base[d];
  }
  if (g.dim == 2) {
    const double v00 = f.values[g.node_index(base[0], base[1])];
    const double v10 = f.values[g.node_index(base[0] + 1, base[1])];
    const double v01 = f.values[g.node_index(base[0], base[1] + 1)];
    const double v11 = f.values[g.node_index(base[0] + 1, base[1] + 1)];
    return (1 - s[0]) * (1 - s[1]) * v00 + s[0] * (1 - s[1]) * v10 +
           (1 - s[0]) * s[1] * v01 + s[0] * s[1] * v11;
  }
  double acc = 0.0;
  for (int dk = 0; dk < 2; ++dk) {
    for (int dj = 0; dj < 2; ++dj) {
      for (int di = 0; di < 2; ++di) {
        const double w = (di ? s[0] : 1 - s[0]) * (dj ? s[1] : 1 - s[1]) *
                         (dk ? s[2] : 1 - s[2]);
        acc += w * f.values[g.node_index(base[0] + di, base[1] + dj,
                                         base[2] + dk)];
      }
    }
  }
  return acc;
}

std::pair<double, double> exterior_range(const ScalarField& f) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t id = 0; id < f.values.size(); ++id) {
    if (f.mask[id] == NodeTag::InsideBody) continue;
    lo = std::min(lo, f.values[id]);
    hi = std::max(hi, f.values[id]);
  }
  return {lo, hi};
}

bool satisfies_maximum_principle(const ScalarField& f, double slack) {
  const GridSpec& g = f.grid;
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  for (std::size_t id = 0; id < f.values.size(); ++id) {
    if (f.values[id] < -slack || f.values[id] > 1.0 + slack) return false;
  }
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = g.node_index(i, j, k);
        if (f.mask[id] != NodeTag::Exterior) continue;
        if (i == 0 || i == nx - 1 || j == 0 || j == ny - 1 ||
            (g.dim == 3 && (k == 0 || k == nz - 1))) {
          continue;
        }
        double nb_min = std::numeric_limits<double>::infinity();
        double nb_max = -nb_min;
        auto visit = [&](int ii, int jj, int kk) {
          const double v = f.values[g.node_index(ii, jj, kk)];
          nb_min = std::min(nb_min, v);
          nb_max = std::max(nb_max, v);
        };
        visit(i - 1, j, k);
        visit(i + 1, j, k);
        visit(i, j - 1, k);
        visit(i, j + 1, k);
        if (g.dim == 3) {
          visit(i, j, k - 1);
          visit(i, j, k + 1);
        }
        const double v = f.values[id];
        if (v > nb_max + slack || v < nb_min - slack) return false;
      }
    }
  }
  return true;
}

}  // namespace pcap
