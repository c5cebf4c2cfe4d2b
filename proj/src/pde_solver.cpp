#include "pcap/pde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "pcap/kernels.hpp"

namespace pcap {

namespace {

struct Workspace {
  const GridSpec* grid = nullptr;
  double p = 2.0;
  int nx = 0, ny = 0, nz = 0;
  std::size_t nnode = 0;
  std::size_t ncell = 0;
  double h = 0.0;
  double sigma = 0.0;  // (p/2) h^(n-2) / 2^n, edge-weight scale
  double quad_w = 0.0; // h^n / 2^n, corner quadrature weight

  std::vector<double> free_mask;  // 1 at Exterior nodes, 0 at Dirichlet
  std::vector<double> wx, wy, wz; // edge weights
  std::vector<double> g2;         // per-cell-corner |grad|^2, corner-major
  std::vector<double> coeff;      // per-cell-corner powered coefficient
  std::vector<double> inv_diag;
  std::vector<double> r, z, pv, q; // CG vectors

  void init(const GridSpec& g, double p_) {
    grid = &g;
    p = p_;
    nx = g.nx();
    ny = g.ny();
    nz = g.nz();
    nnode = g.node_count();
    h = g.spacing();
    const int dim = g.dim;
    ncell = static_cast<std::size_t>(nx - 1) * (ny - 1) *
            (dim == 3 ? (nz - 1) : 1);
    const double two_pow_n = dim == 3 ? 8.0 : 4.0;
    sigma = (p / 2.0) * std::pow(h, dim - 2) / two_pow_n;
    quad_w = std::pow(h, dim) / two_pow_n;
    free_mask.assign(nnode, 0.0);
    wx.assign(static_cast<std::size_t>(nx - 1) * ny * nz, 0.0);
    wy.assign(static_cast<std::size_t>(nx) * (ny - 1) * nz, 0.0);
    if (dim == 3) wz.assign(static_cast<std::size_t>(nx) * ny * (nz - 1), 0.0);
    const std::size_t corners = dim == 3 ? 8 : 4;
    g2.assign(ncell * corners, 0.0);
    coeff.assign(ncell * corners, 0.0);
    inv_diag.assign(nnode, 0.0);
    r.assign(nnode, 0.0);
    z.assign(nnode, 0.0);
    pv.assign(nnode, 0.0);
    q.assign(nnode, 0.0);
  }
};

// Squared corner gradients of every cell. Corner-major storage: corner
// block k holds all cells. 2-d corners: 00,10,01,11 with
//   g2(00) = (db^2 + dl^2)/h^2 etc, db/dt bottom/top x-edges, dl/dr left/
//   right y-edges.
void corner_g2_2d(const GridSpec& g, const double* v, double* g2) {
  const int nx = g.nx(), ny = g.ny();
  const std::size_t cx = static_cast<std::size_t>(nx - 1);
  const std::size_t cy = static_cast<std::size_t>(ny - 1);
  const std::size_t nc = cx * cy;
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  double* c00 = g2;
  double* c10 = g2 + nc;
  double* c01 = g2 + 2 * nc;
  double* c11 = g2 + 3 * nc;
  for (std::size_t j = 0; j < cy; ++j) {
    const double* row0 = v + j * nx;
    const double* row1 = v + (j + 1) * nx;
    double* o00 = c00 + j * cx;
    double* o10 = c10 + j * cx;
    double* o01 = c01 + j * cx;
    double* o11 = c11 + j * cx;
    for (std::size_t i = 0; i < cx; ++i) {
      const double db = row0[i + 1] - row0[i];
      const double dt = row1[i + 1] - row1[i];
      const double dl = row1[i] - row0[i];
      const double dr = row1[i + 1] - row0[i + 1];
      o00[i] = (db * db + dl * dl) * inv_h2;
      o10[i] = (db * db + dr * dr) * inv_h2;
      o01[i] = (dt * dt + dl * dl) * inv_h2;
      o11[i] = (dt * dt + dr * dr) * inv_h2;
    }
  }
}

void corner_g2_3d(const GridSpec& g, const double* v, double* g2) {
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  const std::size_t cx = static_cast<std::size_t>(nx - 1);
  const std::size_t cy = static_cast<std::size_t>(ny - 1);
  const std::size_t cz = static_cast<std::size_t>(nz - 1);
  const std::size_t nc = cx * cy * cz;
  const std::size_t page = static_cast<std::size_t>(nx) * ny;
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  // corner index bit pattern: bit0 = x side, bit1 = y side, bit2 = z side
  for (std::size_t k = 0; k < cz; ++k) {
    for (std::size_t j = 0; j < cy; ++j) {
      const double* n000 = v + k * page + j * nx;
      const double* n010 = n000 + nx;
      const double* n001 = n000 + page;
      const double* n011 = n001 + nx;
      const std::size_t cbase = (k * cy + j) * cx;
      for (std::size_t i = 0; i < cx; ++i) {
        const double v000 = n000[i], v100 = n000[i + 1];
        const double v010 = n010[i], v110 = n010[i + 1];
        const double v001 = n001[i], v101 = n001[i + 1];
        const double v011 = n011[i], v111 = n011[i + 1];
        // x-edges per (y,z) side, y-edges per (x,z), z-edges per (x,y)
        const double dx00 = v100 - v000, dx10 = v110 - v010;
        const double dx01 = v101 - v001, dx11 = v111 - v011;
        const double dy00 = v010 - v000, dy10 = v110 - v100;
        const double dy01 = v011 - v001, dy11 = v111 - v101;
        const double dz00 = v001 - v000, dz10 = v101 - v100;
        const double dz01 = v011 - v010, dz11 = v111 - v110;
        const std::size_t ci = cbase + i;
        g2[0 * nc + ci] = (dx00 * dx00 + dy00 * dy00 + dz00 * dz00) * inv_h2;
        g2[1 * nc + ci] = (dx00 * dx00 + dy10 * dy10 + dz10 * dz10) * inv_h2;
        g2[2 * nc + ci] = (dx10 * dx10 + dy00 * dy00 + dz01 * dz01) * inv_h2;
        g2[3 * nc + ci] = (dx10 * dx10 + dy10 * dy10 + dz11 * dz11) * inv_h2;
        g2[4 * nc + ci] = (dx01 * dx01 + dy01 * dy01 + dz00 * dz00) * inv_h2;
        g2[5 * nc + ci] = (dx01 * dx01 + dy11 * dy11 + dz10 * dz10) * inv_h2;
        g2[6 * nc + ci] = (dx11 * dx11 + dy01 * dy01 + dz01 * dz01) * inv_h2;
        g2[7 * nc + ci] = (dx11 * dx11 + dy11 * dy11 + dz11 * dz11) * inv_h2;
      }
    }
  }
}

void compute_corner_g2(const GridSpec& g, const double* v, double* g2) {
  if (g.dim == 2) {
    corner_g2_2d(g, v, g2);
  } else {
    corner_g2_3d(g, v, g2);
  }
}

// Edge weights from corner coefficients. Every edge collects the
// coefficients of the 2^(n-1) adjacent cells x 2 corners that differentiate
// along it.
void assemble_weights_2d(Workspace& w) {
  const std::size_t cx = static_cast<std::size_t>(w.nx - 1);
  const std::size_t cy = static_cast<std::size_t>(w.ny - 1);
  const std::size_t nc = cx * cy;
  const double* c00 = w.coeff.data();
  const double* c10 = c00 + nc;
  const double* c01 = c00 + 2 * nc;
  const double* c11 = c00 + 3 * nc;
  const double s = w.sigma;
  // x-edges (i,j)-(i+1,j): cell (i,j) corners 00,10; cell (i,j-1) corners 01,11
  for (std::size_t j = 0; j < static_cast<std::size_t>(w.ny); ++j) {
    double* row = w.wx.data() + j * cx;
    const bool has_up = j < cy;
    const bool has_dn = j > 0;
    const double* u00 = has_up ? c00 + j * cx : nullptr;
    const double* u10 = has_up ? c10 + j * cx : nullptr;
    const double* d01 = has_dn ? c01 + (j - 1) * cx : nullptr;
    const double* d11 = has_dn ? c11 + (j - 1) * cx : nullptr;
    for (std::size_t i = 0; i < cx; ++i) {
      double acc = 0.0;
      if (has_up) acc += u00[i] + u10[i];
      if (has_dn) acc += d01[i] + d11[i];
      row[i] = s * acc;
    }
  }
  // y-edges (i,j)-(i,j+1): cell (i,j) corners 00,01; cell (i-1,j) corners 10,11
  for (std::size_t j = 0; j < cy; ++j) {
    double* row = w.wy.data() + j * w.nx;
    const double* r00 = c00 + j * cx;
    const double* r01 = c01 + j * cx;
    const double* r10 = c10 + j * cx;
    const double* r11 = c11 + j * cx;
    for (std::size_t i = 0; i < static_cast<std::size_t>(w.nx); ++i) {
      double acc = 0.0;
      if (i < cx) acc += r00[i] + r01[i];
      if (i > 0) acc += r10[i - 1] + r11[i - 1];
      row[i] = s * acc;
    }
  }
}

void assemble_weights_3d(Workspace& w) {
  const std::size_t cx = static_cast<std::size_t>(w.nx - 1);
  const std::size_t cy = static_cast<std::size_t>(w.ny - 1);
  const std::size_t cz = static_cast<std::size_t>(w.nz - 1);
  const std::size_t nc = cx * cy * cz;
  const double* c = w.coeff.data();
  const double s = w.sigma;
  auto corner = [&](int bit, std::size_t ci) { return c[bit * nc + ci]; };
  auto cell = [&](std::size_t i, std::size_t j, std::size_t k) {
    return (k * cy + j) * cx + i;
  };
  // x-edges: corners differing only in bit0 share the same x-edge of the
  // cell on their (y,z) side.
  std::fill(w.wx.begin(), w.wx.end(), 0.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(w.nz); ++k) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(w.ny); ++j) {
      double* row = w.wx.data() + (k * w.ny + j) * cx;
      for (std::size_t i = 0; i < cx; ++i) {
        double acc = 0.0;
        // cells adjacent to edge: (i, j-dy, k-dz) for dy,dz in {0,1}
        for (int dy = 0; dy < 2; ++dy) {
          if ((dy == 1 && j == 0) || (dy == 0 && j >= cy)) continue;
          for (int dz = 0; dz < 2; ++dz) {
            if ((dz == 1 && k == 0) || (dz == 0 && k >= cz)) continue;
            const std::size_t ci = cell(i, j - dy, k - dz);
            const int ybit = dy << 1;  // edge at cell-local y side dy
            const int zbit = dz << 2;
            acc += corner(0 + ybit + zbit, ci) + corner(1 + ybit + zbit, ci);
          }
        }
        row[i] = s * acc;
      }
    }
  }
  std::fill(w.wy.begin(), w.wy.end(), 0.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(w.nz); ++k) {
    for (std::size_t j = 0; j < cy; ++j) {
      double* row = w.wy.data() + (k * cy + j) * w.nx;
      for (std::size_t i = 0; i < static_cast<std::size_t>(w.nx); ++i) {
        double acc = 0.0;
        for (int dx = 0; dx < 2; ++dx) {
          if ((dx == 1 && i == 0) || (dx == 0 && i >= cx)) continue;
          for (int dz = 0; dz < 2; ++dz) {
            if ((dz == 1 && k == 0) || (dz == 0 && k >= cz)) continue;
            const std::size_t ci = cell(i - dx, j, k - dz);
            const int xbit = dx;
            const int zbit = dz << 2;
            acc += corner(xbit + 0 + zbit, ci) + corner(xbit + 2 + zbit, ci);
          }
        }
        row[i] = s * acc;
      }
    }
  }
  std::fill(w.wz.begin(), w.wz.end(), 0.0);
  for (std::size_t k = 0; k < cz; ++k) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(w.ny); ++j) {
      double* row = w.wz.data() + (k * w.ny + j) * w.nx;
      for (std::size_t i = 0; i < static_cast<std::size_t>(w.nx); ++i) {
        double acc = 0.0;
        for (int dx = 0; dx < 2; ++dx) {
          if ((dx == 1 && i == 0) || (dx == 0 && i >= cx)) continue;
          for (int dy = 0; dy < 2; ++dy) {
            if ((dy == 1 && j == 0) || (dy == 0 && j >= cy)) continue;
            const std::size_t ci = cell(i - dx, j - dy, k);
            const int xbit = dx;
            const int ybit = dy << 1;
            acc += corner(xbit + ybit + 0, ci) + corner(xbit + ybit + 4, ci);
          }
        }
        row[i] = s * acc;
      }
    }
  }
}

void apply_operator(const Workspace& w, const double* v, double* out) {
  const auto& K = kern::active();
  if (w.grid->dim == 2) {
    K.stencil2d(out, v, w.wx.data(), w.wy.data(), w.nx, w.ny);
  } else {
    K.stencil3d(out, v, w.wx.data(), w.wy.data(), w.wz.data(), w.nx, w.ny,
                w.nz);
  }
}

void build_diag(Workspace& w) {
  std::fill(w.inv_diag.begin(), w.inv_diag.end(), 0.0);
  const std::size_t cx = static_cast<std::size_t>(w.nx - 1);
  auto& d = w.inv_diag;
  if (w.grid->dim == 2) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(w.ny); ++j) {
      for (std::size_t i = 0; i < cx; ++i) {
        const double ww = w.wx[j * cx + i];
        d[j * w.nx + i] += ww;
        d[j * w.nx + i + 1] += ww;
      }
    }
    for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(w.ny); ++j) {
      for (std::size_t i = 0; i < static_cast<std::size_t>(w.nx); ++i) {
        const double ww = w.wy[j * w.nx + i];
        d[j * w.nx + i] += ww;
        d[(j + 1) * w.nx + i] += ww;
      }
    }
  } else {
    const std::size_t page = static_cast<std::size_t>(w.nx) * w.ny;
    for (std::size_t k = 0; k < static_cast<std::size_t>(w.nz); ++k) {
      for (std::size_t j = 0; j < static_cast<std::size_t>(w.ny); ++j) {
        for (std::size_t i = 0; i < cx; ++i) {
          const double ww = w.wx[(k * w.ny + j) * cx + i];
          d[k * page + j * w.nx + i] += ww;
          d[k * page + j * w.nx + i + 1] += ww;
        }
      }
      for (std::size_t j = 0; j + 1 < static_cast<std::size_t>(w.ny); ++j) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(w.nx); ++i) {
          const double ww = w.wy[(k * (w.ny - 1) + j) * w.nx + i];
          d[k * page + j * w.nx + i] += ww;
          d[k * page + (j + 1) * w.nx + i] += ww;
        }
      }
    }
    for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(w.nz); ++k) {
      for (std::size_t j = 0; j < static_cast<std::size_t>(w.ny); ++j) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(w.nx); ++i) {
          const double ww = w.wz[(k * w.ny + j) * w.nx + i];
          d[k * page + j * w.nx + i] += ww;
          d[(k + 1) * page + j * w.nx + i] += ww;
        }
      }
    }
  }
  for (std::size_t i = 0; i < w.nnode; ++i) {
    d[i] = (w.free_mask[i] != 0.0 && d[i] > 0.0) ? 1.0 / d[i] : 0.0;
  }
}

double regularized_energy(const Workspace& w, const GridSpec& g,
                          const double* v, double p, double eps2,
                          std::vector<double>& g2buf,
                          std::vector<double>& powbuf) {
  compute_corner_g2(g, v, g2buf.data());
  const auto& K = kern::active();
  K.pow_shift(powbuf.data(), g2buf.data(), g2buf.size(), p / 2.0, eps2);
  double acc = 0.0;
  const double* d = powbuf.data();
  for (std::size_t i = 0; i < powbuf.size(); ++i) acc += d[i];
  return acc * w.quad_w;
}

// Masked PCG for the lagged quadratic; solves A delta = r0 in the free
// subspace, warm-started from delta = 0. Returns iterations used.
int pcg(Workspace& w, std::vector<double>& delta, double rel_tol,
        int max_iter) {
  const auto& K = kern::active();
  const std::size_t n = w.nnode;
  std::fill(delta.begin(), delta.end(), 0.0);
  // r already holds the masked negative gradient
  K.hadamard(w.z.data(), w.inv_diag.data(), w.r.data(), n);
  double rz = K.dot(w.r.data(), w.z.data(), n);
  const double r0 = std::sqrt(K.dot(w.r.data(), w.r.data(), n));
  if (r0 == 0.0) return 0;
  std::memcpy(w.pv.data(), w.z.data(), n * sizeof(double));
  int it = 0;
  for (; it < max_iter; ++it) {
    apply_operator(w, w.pv.data(), w.q.data());
    K.hadamard(w.q.data(), w.q.data(), w.free_mask.data(), n);
    const double pq = K.dot(w.pv.data(), w.q.data(), n);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    K.axpy(delta.data(), alpha, w.pv.data(), n);
    K.axpy(w.r.data(), -alpha, w.q.data(), n);
    const double rn = std::sqrt(K.dot(w.r.data(), w.r.data(), n));
    if (rn <= rel_tol * r0) {
      ++it;
      break;
    }
    K.hadamard(w.z.data(), w.inv_diag.data(), w.r.data(), n);
    const double rz_new = K.dot(w.r.data(), w.z.data(), n);
    K.xpby(w.pv.data(), w.z.data(), rz_new / rz, n);
    rz = rz_new;
  }
  return it;
}

double mean_gradient_magnitude(const std::vector<double>& g2) {
  double acc = 0.0;
  for (double v : g2) acc += std::sqrt(v);
  return g2.empty() ? 0.0 : acc / static_cast<double>(g2.size());
}

struct FarfieldFit {
  double coeff = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int samples = 0;
};

FarfieldFit fit_farfield(const ScalarField& f, const Params& mp,
                         const Vec& center) {
  const GridSpec& g = f.grid;
  const double h = g.spacing();
  double face_dist = std::numeric_limits<double>::infinity();
  for (int d = 0; d < g.dim; ++d) {
    face_dist = std::min(face_dist, g.hi[d] - center[d]);
    face_dist = std::min(face_dist, center[d] - g.lo[d]);
  }
  const double r_fit = 0.75 * face_dist;
  const double q = mp.q_rad;
  double num = 0.0, den = 0.0;
  FarfieldFit fit;
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  std::vector<std::pair<double, double>> samples;  // (r^-q, u)
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = g.node_index(i, j, k);
        if (f.mask[id] != NodeTag::Exterior) continue;
        const double r = dist(g.node_pos(i, j, k), center);
        if (std::abs(r - r_fit) > h) continue;
        const double basis = std::pow(r, -q);
        num += f.values[id] * basis;
        den += basis * basis;
        samples.emplace_back(basis, f.values[id]);
      }
    }
  }
  if (samples.empty() || den <= 0.0) return fit;
  fit.coeff = num / den;
  fit.samples = static_cast<int>(samples.size());
  const double scale = std::abs(fit.coeff) * std::pow(r_fit, -q);
  double worst = 0.0;
  for (const auto& [basis, u] : samples) {
    worst = std::max(worst, std::abs(u - fit.coeff * basis));
  }
  fit.residual = scale > 0.0 ? worst / scale
                             : std::numeric_limits<double>::infinity();
  return fit;
}

}  // namespace

std::vector<std::uint8_t> nodes_away_from_transitions(const ScalarField& f,
                                                      int band) {
  const GridSpec& g = f.grid;
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  std::vector<std::uint8_t> bad(f.mask.size(), 0);
  for (std::size_t i = 0; i < f.mask.size(); ++i) {
    bad[i] = f.mask[i] == NodeTag::InsideBody ? 1 : 0;
  }
  // Chebyshev dilation of the body mask, band steps.
  std::vector<std::uint8_t> tmp(bad.size());
  for (int step = 0; step < band; ++step) {
    tmp = bad;
    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          if (tmp[g.node_index(i, j, k)]) continue;
          bool near = false;
          for (int dk = -1; dk <= 1 && !near; ++dk) {
            if (g.dim == 2 && dk != 0) continue;
            for (int dj = -1; dj <= 1 && !near; ++dj) {
              for (int di = -1; di <= 1 && !near; ++di) {
                const int ii = i + di, jj = j + dj, kk = k + dk;
                if (ii < 0 || ii >= nx || jj < 0 || jj >= ny || kk < 0 ||
                    kk >= nz)
                  continue;
                near = tmp[g.node_index(ii, jj, kk)] != 0;
              }
            }
          }
          if (near) bad[g.node_index(i, j, k)] = 1;
        }
      }
    }
  }
  std::vector<std::uint8_t> safe(bad.size(), 0);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = g.node_index(i, j, k);
        if (f.mask[id] != NodeTag::Exterior) continue;
        if (bad[id]) continue;
        const bool near_face = i < band || i >= nx - band || j < band ||
                               j >= ny - band ||
                               (g.dim == 3 && (k < band || k >= nz - band));
        if (!near_face) safe[id] = 1;
      }
    }
  }
  return safe;
}

double radial_value(const Vec& center, double radius, const Params& mp,
                    const Vec& x) {
  const double r = dist(x, center);
  if (r <= radius) return 1.0;
  return std::pow(radius / r, mp.q_rad);
}

ScalarField radial_solution(const Vec& center, double radius,
                            const Params& mp, const GridSpec& grid) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("radial_solution: radius must be positive");
  }
  ScalarField f = sample_field(
      grid, [&](const Vec& x) { return radial_value(center, radius, mp, x); });
  const int nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = grid.node_index(i, j, k);
        if (dist(grid.node_pos(i, j, k), center) <= radius) {
          f.mask[id] = NodeTag::InsideBody;
          f.values[id] = 1.0;
        }
      }
    }
  }
  return f;
}

double discrete_p_energy(const ScalarField& field, double p, double eps2,
                         double below_level) {
  const GridSpec& g = field.grid;
  const int corners = g.dim == 3 ? 8 : 4;
  const std::size_t ncell = static_cast<std::size_t>(g.cells[0]) *
                            g.cells[1] * (g.dim == 3 ? g.cells[2] : 1);
  std::vector<double> g2(ncell * static_cast<std::size_t>(corners));
  compute_corner_g2(g, field.values.data(), g2.data());
  std::vector<double> pw(g2.size());
  kern::active().pow_shift(pw.data(), g2.data(), g2.size(), p / 2.0, eps2);
  const double quad_w =
      std::pow(g.spacing(), g.dim) / (g.dim == 3 ? 8.0 : 4.0);
  const int nx = g.nx(), ny = g.ny();
  const std::size_t cx = static_cast<std::size_t>(g.cells[0]);
  const std::size_t cy = static_cast<std::size_t>(g.cells[1]);
  const std::size_t cz = g.dim == 3 ? static_cast<std::size_t>(g.cells[2]) : 1;
  const std::size_t nc = cx * cy * cz;
  const double* v = field.values.data();
  double acc = 0.0;
  for (std::size_t k = 0; k < cz; ++k) {
    for (std::size_t j = 0; j < cy; ++j) {
      for (std::size_t i = 0; i < cx; ++i) {
        const std::size_t ci = (k * cy + j) * cx + i;
        for (int c = 0; c < corners; ++c) {
          const std::size_t di = i + (c & 1);
          const std::size_t dj = j + ((c >> 1) & 1);
          const std::size_t dk = k + ((c >> 2) & 1);
          const double uval =
              v[(dk * ny + dj) * static_cast<std::size_t>(nx) + di];
          if (uval < below_level) {
            acc += pw[static_cast<std::size_t>(c) * nc + ci];
          }
        }
      }
    }
  }
  return acc * quad_w;
}

double residual_norm(const ScalarField& field, const Params& mp) {
  Workspace w;
  w.init(field.grid, mp.p);
  for (std::size_t i = 0; i < field.mask.size(); ++i) {
    w.free_mask[i] = field.mask[i] == NodeTag::Exterior ? 1.0 : 0.0;
  }
  compute_corner_g2(field.grid, field.values.data(), w.g2.data());
  // Tiny absolute floor: keeps exactly-flat cells finite without biasing
  // anything measurable.
  kern::active().pow_shift(w.coeff.data(), w.g2.data(), w.g2.size(),
                           (mp.p - 2.0) / 2.0, 1e-300);
  if (field.grid.dim == 2) {
    assemble_weights_2d(w);
  } else {
    assemble_weights_3d(w);
  }
  std::vector<double> out(w.nnode);
  apply_operator(w, field.values.data(), out.data());
  const std::vector<std::uint8_t> safe = nodes_away_from_transitions(field, 2);
  const double scale = 1.0 / (mp.p * std::pow(field.grid.spacing(),
                                              field.grid.dim));
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (safe[i]) worst = std::max(worst, std::abs(out[i]) * scale);
  }
  return worst;
}

GridSpec auto_grid_for_body(const ConvexBody& body, int cells,
                            double half_width) {
  const Vec c = support_center(body);
  double L = half_width;
  if (!(L > 0.0)) L = 5.2 * circumradius(body, c);
  return make_grid_centered(body.dirs->dim, c, L, cells);
}

SolveReport solve_exterior(const ConvexBody& body, const SolverConfig& cfg) {
  const Params& mp = cfg.params;
  const GridSpec& g = cfg.grid;
  if (g.dim != mp.n || body.dirs->dim != mp.n) {
    throw std::invalid_argument(
        "solve_exterior: grid/body dimension mismatch with params");
  }
  const Vec center = support_center(body);
  const double r_circ = circumradius(body, center);
  double face_dist = std::numeric_limits<double>::infinity();
  for (int d = 0; d < g.dim; ++d) {
    face_dist = std::min(face_dist, g.hi[d] - center[d]);
    face_dist = std::min(face_dist, center[d] - g.lo[d]);
  }
  const double clearance = face_dist - r_circ;
  const double diam = 2.0 * r_circ;
  if (!(clearance > 0.0)) {
    throw SolveError("solve_exterior: body touches the truncation box", 0.0, 0);
  }
  if (clearance < 2.0 * diam - 1e-9) {
    throw SolveError(
        "solve_exterior: clearance below 2 x body diameter (box too small)",
        0.0, 0);
  }

  Workspace w;
  w.init(g, mp.p);
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();

  ScalarField f;
  f.grid = g;
  f.values.assign(w.nnode, 0.0);
  f.mask.assign(w.nnode, NodeTag::Exterior);
  const double r_in = inradius(body, center);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = g.node_index(i, j, k);
        const bool face = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 ||
                          (g.dim == 3 && (k == 0 || k == nz - 1));
        if (face) {
          f.mask[id] = NodeTag::OuterBoundary;
          continue;
        }
        const Vec x = g.node_pos(i, j, k);
        const double r = dist(x, center);
        bool in;
        if (r <= r_in) {
          in = true;
        } else if (r > r_circ + 1e-12) {
          in = false;
        } else {
          in = contains(body, x);
        }
        if (in) f.mask[id] = NodeTag::InsideBody;
      }
    }
  }
  for (std::size_t i = 0; i < w.nnode; ++i) {
    w.free_mask[i] = f.mask[i] == NodeTag::Exterior ? 1.0 : 0.0;
  }

  const double q = mp.q_rad;
  double C = std::pow(r_circ, q);
  auto boundary_value = [&](const Vec& x) {
    if (cfg.farfield_mode == FarfieldMode::ZeroDirichlet) return 0.0;
    return std::min(1.0, C * std::pow(dist(x, center), -q));
  };
  // Initial guess: the circumscribed ball's radial profile.
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = g.node_index(i, j, k);
        const Vec x = g.node_pos(i, j, k);
        switch (f.mask[id]) {
          case NodeTag::InsideBody:
            f.values[id] = 1.0;
            break;
          case NodeTag::OuterBoundary:
            f.values[id] = boundary_value(x);
            break;
          case NodeTag::Exterior:
            f.values[id] =
                std::min(1.0, C * std::pow(std::max(dist(x, center), 1e-12), -q));
            break;
        }
      }
    }
  }

  SolveReport rep;
  rep.farfield_center = center;
  rep.farfield_mode = cfg.farfield_mode;
  const auto& K = kern::active();
  std::vector<double> delta(w.nnode, 0.0);
  std::vector<double> trial(w.nnode, 0.0);
  std::vector<double> powbuf(w.g2.size());
  const int outer_budget =
      cfg.farfield_mode == FarfieldMode::ZeroDirichlet ? 1 : cfg.max_outer;
  bool inner_converged = false;
  double last_rel_drop = std::numeric_limits<double>::infinity();
  double grad_norm_init = -1.0;

  for (int outer = 0; outer < outer_budget; ++outer) {
    rep.outer_iterations = outer + 1;
    // refresh the relative regularization from the current iterate
    compute_corner_g2(g, f.values.data(), w.g2.data());
    const double gbar = mean_gradient_magnitude(w.g2);
    const double eps = cfg.epsilon_reg * std::max(gbar, 1e-30);
    const double eps2 = eps * eps;

    double energy =
        regularized_energy(w, g, f.values.data(), mp.p, eps2, w.g2, powbuf);
    rep.energy_history.emplace_back();
    rep.energy_history.back().push_back(energy);
    inner_converged = false;

    double rel_drop_prev = 1.0;
    double prev_grad_norm = -1.0;
    bool polishing = false;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      ++rep.picard_iterations;
      compute_corner_g2(g, f.values.data(), w.g2.data());
      K.pow_shift(w.coeff.data(), w.g2.data(), w.g2.size(), (mp.p - 2.0) / 2.0,
                  eps2);
      if (g.dim == 2) {
        assemble_weights_2d(w);
      } else {
        assemble_weights_3d(w);
      }
      build_diag(w);
      // negative gradient of the lagged quadratic (== of the energy)
      apply_operator(w, f.values.data(), w.r.data());
      for (std::size_t i = 0; i < w.nnode; ++i) {
        w.r[i] = -w.r[i] * w.free_mask[i];
      }
      double grad_norm = -1.0;
      if (cfg.grad_tol > 0.0) {
        grad_norm = std::sqrt(K.dot(w.r.data(), w.r.data(), w.nnode));
        if (grad_norm_init < 0.0) grad_norm_init = std::max(grad_norm, 1e-300);
        if (grad_norm <= cfg.grad_tol * grad_norm_init) {
          inner_converged = true;
          break;
        }
        // polish regime: energy differences are below the fp floor but the
        // gradient still has room; require the norm to keep decreasing
        if (prev_grad_norm > 0.0 && grad_norm >= prev_grad_norm &&
            polishing) {
          inner_converged = true;
          break;
        }
        prev_grad_norm = grad_norm;
      }
      const double cg_tol = std::clamp(0.05 * rel_drop_prev, cfg.cg_tol_floor,
                                       1e-2);
      rep.cg_iterations += pcg(w, delta, cg_tol, cfg.cg_max_iter);

      // damped energy descent
      double step = 1.0;
      double new_energy = energy;
      bool accepted = false;
      for (int halvings = 0; halvings < 30; ++halvings) {
        std::memcpy(trial.data(), f.values.data(),
                    w.nnode * sizeof(double));
        K.axpy(trial.data(), step, delta.data(), w.nnode);
        const double e_try =
            regularized_energy(w, g, trial.data(), mp.p, eps2, w.g2, powbuf);
        if (e_try <= energy * (1.0 + 1e-15)) {
          std::swap(f.values, trial);
          new_energy = e_try;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        if (cfg.grad_tol > 0.0) {
          // undamped Picard step below the energy resolution; the gradient
          // check above supervises it
          K.axpy(f.values.data(), 1.0, delta.data(), w.nnode);
          polishing = true;
          continue;
        }
        inner_converged = true;  // at the floating-point floor
        break;
      }
      rep.energy_history.back().push_back(new_energy);
      const double rel_drop =
          (energy - new_energy) / std::max(std::abs(new_energy), 1e-300);
      energy = new_energy;
      rel_drop_prev = std::max(rel_drop, 1e-16);
      last_rel_drop = rel_drop;
      if (cfg.grad_tol <= 0.0 && rel_drop < cfg.tol) {
        inner_converged = true;
        break;
      }
    }
    rep.energy = energy;

    const FarfieldFit fit = fit_farfield(f, mp, center);
    if (fit.samples > 0 && fit.coeff > 0.0) {
      const double change = std::abs(fit.coeff - C) / fit.coeff;
      rep.farfield_coeff = fit.coeff;
      rep.farfield_residual = fit.residual;
      if (cfg.farfield_mode == FarfieldMode::AsymptoticDirichlet) {
        C = fit.coeff;
        if (outer + 1 < outer_budget) {
          if (change < 2e-3) break;
          // push the refreshed data onto the outer ring and re-solve
          for (int k = 0; k < nz; ++k) {
            for (int j = 0; j < ny; ++j) {
              for (int i = 0; i < nx; ++i) {
                const std::size_t id = g.node_index(i, j, k);
                if (f.mask[id] == NodeTag::OuterBoundary) {
                  f.values[id] = boundary_value(g.node_pos(i, j, k));
                }
              }
            }
          }
          continue;
        }
      }
    } else {
      rep.farfield_coeff = C;
      rep.farfield_residual = std::numeric_limits<double>::infinity();
    }
    break;
  }

  rep.converged = inner_converged;
  if (!inner_converged && last_rel_drop > 1000.0 * cfg.tol) {
    throw SolveError(
        "solve_exterior: Picard iteration exhausted max_inner (last relative "
        "energy drop " +
            std::to_string(last_rel_drop) + ")",
        last_rel_drop, rep.picard_iterations);
  }

  rep.field = std::move(f);
  rep.residual = residual_norm(rep.field, mp);
  if (!satisfies_maximum_principle(rep.field, 1e-10)) {
    throw SolveError("solve_exterior: maximum principle violated", rep.residual,
                     rep.picard_iterations);
  }
  return rep;
}

}  // namespace pcap
