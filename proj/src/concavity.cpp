#include "pcap/concavity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "pcap/level_set.hpp"
#include "pcap/pde_solver.hpp"

namespace pcap {

namespace {

struct Derivs {
  double v;
  double g[3];
  double hess[3][3];
};

Derivs node_derivs(const ScalarField& u, int i, int j, int k) {
  const GridSpec& g = u.grid;
  const double h = g.spacing();
  const double inv2h = 1.0 / (2.0 * h);
  const double invh2 = 1.0 / (h * h);
  auto val = [&](int ii, int jj, int kk) {
    return u.values[g.node_index(ii, jj, kk)];
  };
  Derivs d{};
  d.v = val(i, j, k);
  d.g[0] = (val(i + 1, j, k) - val(i - 1, j, k)) * inv2h;
  d.g[1] = (val(i, j + 1, k) - val(i, j - 1, k)) * inv2h;
  d.hess[0][0] = (val(i + 1, j, k) - 2.0 * d.v + val(i - 1, j, k)) * invh2;
  d.hess[1][1] = (val(i, j + 1, k) - 2.0 * d.v + val(i, j - 1, k)) * invh2;
  d.hess[0][1] = d.hess[1][0] =
      (val(i + 1, j + 1, k) - val(i + 1, j - 1, k) - val(i - 1, j + 1, k) +
       val(i - 1, j - 1, k)) *
      0.25 * invh2;
  if (g.dim == 3) {
    d.g[2] = (val(i, j, k + 1) - val(i, j, k - 1)) * inv2h;
    d.hess[2][2] = (val(i, j, k + 1) - 2.0 * d.v + val(i, j, k - 1)) * invh2;
    d.hess[0][2] = d.hess[2][0] =
        (val(i + 1, j, k + 1) - val(i + 1, j, k - 1) - val(i - 1, j, k + 1) +
         val(i - 1, j, k - 1)) *
        0.25 * invh2;
    d.hess[1][2] = d.hess[2][1] =
        (val(i, j + 1, k + 1) - val(i, j + 1, k - 1) - val(i, j - 1, k + 1) +
         val(i, j - 1, k - 1)) *
        0.25 * invh2;
  }
  return d;
}

}  // namespace

PointwiseAlphaResult concavity_number_pointwise(
    const ScalarField& u, const DirectionGrid& dirs, double delta,
    int boundary_band, const std::vector<std::size_t>* sample_nodes) {
  const GridSpec& g = u.grid;
  const std::vector<std::uint8_t> safe =
      nodes_away_from_transitions(u, boundary_band);
  std::vector<std::size_t> nodes;
  if (sample_nodes) {
    for (std::size_t id : *sample_nodes) {
      if (id < safe.size() && safe[id]) nodes.push_back(id);
    }
  } else {
    for (std::size_t id = 0; id < safe.size(); ++id) {
      if (safe[id]) nodes.push_back(id);
    }
  }
  if (nodes.empty()) {
    throw std::runtime_error(
        "concavity_number_pointwise: no admissible sample nodes");
  }

  const int nx = g.nx(), ny = g.ny();
  auto decompose = [&](std::size_t id, int& i, int& j, int& k) {
    i = static_cast<int>(id % static_cast<std::size_t>(nx));
    j = static_cast<int>((id / static_cast<std::size_t>(nx)) %
                         static_cast<std::size_t>(ny));
    k = static_cast<int>(id / (static_cast<std::size_t>(nx) *
                               static_cast<std::size_t>(ny)));
  };

  double grad_mean = 0.0;
  std::vector<Derivs> cache;
  cache.reserve(nodes.size());
  for (std::size_t id : nodes) {
    int i, j, k;
    decompose(id, i, j, k);
    cache.push_back(node_derivs(u, i, j, k));
    const Derivs& d = cache.back();
    grad_mean += std::sqrt(d.g[0] * d.g[0] + d.g[1] * d.g[1] + d.g[2] * d.g[2]);
  }
  grad_mean /= static_cast<double>(nodes.size());
  const double floor = delta * std::max(grad_mean, 1e-300);

  PointwiseAlphaResult res;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const Derivs& d = cache[idx];
    for (const Vec& th : dirs.dirs) {
      const double vth = d.g[0] * th[0] + d.g[1] * th[1] + d.g[2] * th[2];
      if (std::abs(vth) <= floor) {
        ++res.samples_excluded;
        continue;
      }
      double vtt = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        for (int b = 0; b < g.dim; ++b) {
          vtt += th[a] * d.hess[a][b] * th[b];
        }
      }
      const double ratio = d.v * vtt / (vth * vth);
      if (ratio > worst) {
        worst = ratio;
        int i, j, k;
        decompose(nodes[idx], i, j, k);
        res.argmax_point = g.node_pos(i, j, k);
      }
      ++res.samples_used;
    }
  }
  if (res.samples_used == 0) {
    throw std::runtime_error(
        "concavity_number_pointwise: every sample excluded by the gradient "
        "floor");
  }
  res.excluded_fraction =
      static_cast<double>(res.samples_excluded) /
      static_cast<double>(res.samples_used + res.samples_excluded);
  res.alpha = 1.0 - worst;
  return res;
}

int SupportMatrix::valid_levels() const {
  int n = 0;
  for (std::uint8_t ok : level_ok) n += ok ? 1 : 0;
  return n;
}

SupportMatrix support_matrix(const ScalarField& u,
                             std::span<const double> t_grid,
                             std::shared_ptr<const DirectionGrid> dirs) {
  SupportMatrix s;
  s.dirs = dirs;
  s.t_grid.assign(t_grid.begin(), t_grid.end());
  for (std::size_t i = 1; i < s.t_grid.size(); ++i) {
    if (!(s.t_grid[i] > s.t_grid[i - 1])) {
      throw std::invalid_argument("support_matrix: levels must increase");
    }
  }
  s.h.resize(s.t_grid.size());
  s.level_ok.assign(s.t_grid.size(), 0);
  s.notes.resize(s.t_grid.size());
  for (std::size_t li = 0; li < s.t_grid.size(); ++li) {
    try {
      ConvexBody body = level_set_extract(u, s.t_grid[li], dirs);
      s.h[li] = std::move(body.support);
      s.level_ok[li] = 1;
    } catch (const std::exception& ex) {
      s.notes[li] = ex.what();
    }
  }
  return s;
}

SupportAlphaResult alpha_from_support(const SupportMatrix& s) {
  if (s.valid_levels() < 5) {
    throw std::runtime_error("alpha_from_support: need >= 5 resolved levels");
  }
  const int m = s.dirs->count();
  const std::size_t nt = s.t_grid.size();

  // first pass: scale of h_t for the exclusion floor and quasi-concavity
  double ht_scale = 0.0;
  auto triple_ok = [&](std::size_t li) {
    return li >= 1 && li + 1 < nt && s.level_ok[li - 1] && s.level_ok[li] &&
           s.level_ok[li + 1];
  };
  // Central differences in log-t: levels are geometric by default, so the
  // stencil is symmetric there, and h ~ t^(-1/q) (affine in log-log) is
  // differentiated with only an O(dtau^2 / 12) bias instead of the
  // first-order penalty a strongly nonuniform t-stencil pays.
  auto derivatives = [&](std::size_t li, int dir, double& ht, double& htt) {
    const double t0 = s.t_grid[li];
    const double dm = std::log(t0 / s.t_grid[li - 1]);
    const double dp = std::log(s.t_grid[li + 1] / t0);
    const double hm = s.h[li - 1][static_cast<std::size_t>(dir)];
    const double h0 = s.h[li][static_cast<std::size_t>(dir)];
    const double hp = s.h[li + 1][static_cast<std::size_t>(dir)];
    const double d1 = -dp / (dm * (dm + dp)) * hm +
                      (dp - dm) / (dm * dp) * h0 +
                      dm / (dp * (dm + dp)) * hp;  // dh/dtau
    const double d2 = 2.0 * (dp * hm - (dm + dp) * h0 + dm * hp) /
                      (dm * dp * (dm + dp));       // d2h/dtau2
    ht = d1 / t0;
    htt = (d2 - d1) / (t0 * t0);
  };
  for (std::size_t li = 0; li < nt; ++li) {
    if (!triple_ok(li)) continue;
    for (int dir = 0; dir < m; ++dir) {
      double ht, htt;
      derivatives(li, dir, ht, htt);
      ht_scale = std::max(ht_scale, std::abs(ht));
    }
  }
  if (ht_scale == 0.0) {
    throw std::runtime_error("alpha_from_support: degenerate support matrix");
  }

  SupportAlphaResult res;
  double best = std::numeric_limits<double>::infinity();
  const double ht_floor = 1e-8 * ht_scale;
  const double quasi_tol = 0.02 * ht_scale;
  for (std::size_t li = 0; li < nt; ++li) {
    if (!triple_ok(li)) continue;
    for (int dir = 0; dir < m; ++dir) {
      double ht, htt;
      derivatives(li, dir, ht, htt);
      if (ht > quasi_tol) {
        throw std::runtime_error(
            "alpha_from_support: quasi-concavity violation (h_t > 0) at t=" +
            std::to_string(s.t_grid[li]));
      }
      if (std::abs(ht) < ht_floor) {
        ++res.samples_excluded;
        continue;
      }
      const double a = 1.0 + s.t_grid[li] * htt / ht;
      if (a < best) {
        best = a;
        res.argmin_t = s.t_grid[li];
        res.argmin_dir = dir;
      }
      ++res.samples_used;
    }
  }
  if (res.samples_used == 0) {
    throw std::runtime_error("alpha_from_support: every sample excluded");
  }
  res.excluded_fraction =
      static_cast<double>(res.samples_excluded) /
      static_cast<double>(res.samples_used + res.samples_excluded);
  res.alpha = best;
  return res;
}

MidpointReport midpoint_concavity_test(const ScalarField& u, double alpha,
                                       int pair_count, std::uint64_t rng_seed,
                                       double floor, double rel_tol) {
  if (!(alpha < 0.0)) {
    throw std::invalid_argument("midpoint_concavity_test: alpha must be < 0");
  }
  const GridSpec& g = u.grid;
  std::vector<std::size_t> candidates;
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t id = g.node_index(i, j, k);
        if (u.mask[id] == NodeTag::Exterior && u.values[id] >= floor) {
          candidates.push_back(id);
        }
      }
    }
  }
  MidpointReport rep;
  rep.alpha = alpha;
  rep.tolerance = rel_tol;
  if (candidates.size() < 2) {
    rep.passed = false;
    return rep;
  }
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  auto pos_of = [&](std::size_t id) {
    const int i = static_cast<int>(id % static_cast<std::size_t>(nx));
    const int j = static_cast<int>((id / static_cast<std::size_t>(nx)) %
                                   static_cast<std::size_t>(ny));
    const int k = static_cast<int>(id / (static_cast<std::size_t>(nx) *
                                         static_cast<std::size_t>(ny)));
    return g.node_pos(i, j, k);
  };
  double worst = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < pair_count; ++n) {
    const std::size_t ia = pick(rng);
    const std::size_t ib = pick(rng);
    if (ia == ib) continue;
    const std::size_t a = candidates[ia], b = candidates[ib];
    const Vec xa = pos_of(a), xb = pos_of(b);
    const Vec mid = 0.5 * (xa + xb);
    const double umid = interpolate(u, mid);
    if (!(umid > 0.0)) continue;
    const double lhs = std::pow(umid, alpha);
    const double rhs =
        0.5 * (std::pow(u.values[a], alpha) + std::pow(u.values[b], alpha));
    const double viol = (lhs - rhs) / std::max(std::abs(rhs), 1e-300);
    ++rep.pairs_evaluated;
    if (viol > worst) {
      worst = viol;
      rep.worst_x = xa;
      rep.worst_y = xb;
      rep.worst_mid_value = umid;
    }
  }
  rep.worst_violation = worst;
  rep.passed = worst <= rel_tol;
  return rep;
}

}  // namespace pcap
