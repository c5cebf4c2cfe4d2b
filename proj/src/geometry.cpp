#include "pcap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pcap {

namespace {

bool same_grid(const ConvexBody& a, const ConvexBody& b) {
  if (a.dirs == b.dirs) return true;
  if (!a.dirs || !b.dirs) return false;
  if (a.dirs->dim != b.dirs->dim || a.dirs->count() != b.dirs->count())
    return false;
  for (int i = 0; i < a.dirs->count(); ++i) {
    const Vec d = a.dirs->dirs[i] - b.dirs->dirs[i];
    if (norm(d) > 1e-14) return false;
  }
  return true;
}

void require_same_grid(const ConvexBody& a, const ConvexBody& b,
                       const char* op) {
  if (!same_grid(a, b)) {
    throw std::invalid_argument(std::string(op) +
                                ": bodies must share a direction grid");
  }
}

double cross2(const Vec& o, const Vec& a, const Vec& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Solves the small SPD system G x = rhs in place (partial pivoting).
void solve_dense(std::vector<double>& G, std::vector<double>& rhs, int m) {
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r) {
      if (std::abs(G[r * m + col]) > std::abs(G[piv * m + col])) piv = r;
    }
    if (std::abs(G[piv * m + col]) < 1e-300) {
      throw std::runtime_error("homothety_fit: singular normal equations");
    }
    if (piv != col) {
      for (int c = 0; c < m; ++c) std::swap(G[col * m + c], G[piv * m + c]);
      std::swap(rhs[col], rhs[piv]);
    }
    const double inv = 1.0 / G[col * m + col];
    for (int r = col + 1; r < m; ++r) {
      const double f = G[r * m + col] * inv;
      if (f == 0.0) continue;
      for (int c = col; c < m; ++c) G[r * m + c] -= f * G[col * m + c];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int r = m - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < m; ++c) acc -= G[r * m + c] * rhs[c];
    rhs[r] = acc / G[r * m + r];
  }
}

}  // namespace

int DirectionGrid::antipode(int i) const {
  const int m = count();
  if (dim == 2) return (i + m / 2) % m;
  const Vec neg = -1.0 * dirs[static_cast<std::size_t>(i)];
  int best = 0;
  double best_dot = -2.0;
  for (int j = 0; j < m; ++j) {
    const double d = dot(dirs[static_cast<std::size_t>(j)], neg);
    if (d > best_dot) {
      best_dot = d;
      best = j;
    }
  }
  return best;
}

std::shared_ptr<const DirectionGrid> make_direction_grid(int dim, int count) {
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("make_direction_grid: dim must be 2 or 3");
  }
  auto g = std::make_shared<DirectionGrid>();
  g->dim = dim;
  if (dim == 2) {
    if (count < 64 || count % 4 != 0) {
      throw std::invalid_argument(
          "make_direction_grid: n=2 needs count >= 64, multiple of 4");
    }
    g->dirs.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / count;
      g->dirs.emplace_back(std::cos(phi), std::sin(phi));
    }
  } else {
    if (count < 32) {
      throw std::invalid_argument("make_direction_grid: n=3 needs count >= 32");
    }
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    g->dirs.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * k;
      Vec d(r * std::cos(phi), r * std::sin(phi), z);
      const double nn = norm(d);
      g->dirs.push_back((1.0 / nn) * d);
    }
  }
  return g;
}

ConvexBody make_ball(const Vec& center, double radius,
                     std::shared_ptr<const DirectionGrid> dirs) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("make_ball: radius must be positive");
  }
  ConvexBody b;
  b.dirs = std::move(dirs);
  b.support.resize(static_cast<std::size_t>(b.dirs->count()));
  for (int i = 0; i < b.dirs->count(); ++i) {
    b.support[static_cast<std::size_t>(i)] =
        dot(center, b.dirs->dirs[static_cast<std::size_t>(i)]) + radius;
  }
  b.exact = BallForm{center, radius};
  return b;
}

std::vector<Vec> convex_hull_2d(std::vector<Vec> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec& a, const Vec& b) {
                          return a[0] == b[0] && a[1] == b[1];
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

ConvexBody make_polygon(const std::vector<Vec>& vertices,
                        std::shared_ptr<const DirectionGrid> dirs) {
  if (dirs->dim != 2) {
    throw std::invalid_argument("make_polygon: n=2 only");
  }
  if (vertices.size() < 3) {
    throw std::invalid_argument("make_polygon: need at least 3 vertices");
  }
  std::vector<Vec> hull = convex_hull_2d(vertices);
  if (hull.size() < 3) {
    throw std::invalid_argument("make_polygon: degenerate (collinear) input");
  }
  ConvexBody b;
  b.dirs = std::move(dirs);
  b.support.resize(static_cast<std::size_t>(b.dirs->count()));
  for (int i = 0; i < b.dirs->count(); ++i) {
    const Vec& th = b.dirs->dirs[static_cast<std::size_t>(i)];
    double h = -std::numeric_limits<double>::infinity();
    for (const Vec& v : hull) h = std::max(h, dot(v, th));
    b.support[static_cast<std::size_t>(i)] = h;
  }
  b.exact = PolygonForm{std::move(hull)};
  return b;
}

ConvexBody make_ellipse(const Vec& center, double a, double b,
                        std::shared_ptr<const DirectionGrid> dirs) {
  if (dirs->dim != 2) {
    throw std::invalid_argument("make_ellipse: n=2 only");
  }
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("make_ellipse: semi-axes must be positive");
  }
  ConvexBody body;
  body.dirs = std::move(dirs);
  body.support.resize(static_cast<std::size_t>(body.dirs->count()));
  for (int i = 0; i < body.dirs->count(); ++i) {
    const Vec& th = body.dirs->dirs[static_cast<std::size_t>(i)];
    body.support[static_cast<std::size_t>(i)] =
        dot(center, th) + std::sqrt(a * a * th[0] * th[0] + b * b * th[1] * th[1]);
  }
  return body;
}

ConvexBody body_from_points(const std::vector<Vec>& points,
                            std::shared_ptr<const DirectionGrid> dirs) {
  if (dirs->dim != 2) {
    throw std::invalid_argument("body_from_points: n=2 only");
  }
  std::vector<Vec> hull = convex_hull_2d(points);
  if (hull.size() < 3) {
    throw std::invalid_argument("body_from_points: degenerate point set");
  }
  ConvexBody b;
  b.dirs = std::move(dirs);
  b.support.resize(static_cast<std::size_t>(b.dirs->count()));
  for (int i = 0; i < b.dirs->count(); ++i) {
    const Vec& th = b.dirs->dirs[static_cast<std::size_t>(i)];
    double h = -std::numeric_limits<double>::infinity();
    for (const Vec& v : hull) h = std::max(h, dot(v, th));
    b.support[static_cast<std::size_t>(i)] = h;
  }
  b.exact = PolygonForm{std::move(hull)};
  return b;
}

ConvexBody minkowski_combination(const ConvexBody& a, const ConvexBody& b,
                                 double lambda) {
  require_same_grid(a, b, "minkowski_combination");
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("minkowski_combination: lambda in [0,1]");
  }
  ConvexBody out;
  out.dirs = a.dirs;
  out.support.resize(a.support.size());
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    out.support[i] = (1.0 - lambda) * a.support[i] + lambda * b.support[i];
  }
  const auto* ba = std::get_if<BallForm>(&a.exact);
  const auto* bb = std::get_if<BallForm>(&b.exact);
  if (ba && bb) {
    out.exact = BallForm{(1.0 - lambda) * ba->center + lambda * bb->center,
                         (1.0 - lambda) * ba->radius + lambda * bb->radius};
  }
  return out;
}

ConvexBody scale_translate(const ConvexBody& a, double rho, const Vec& xi) {
  if (!(rho > 0.0)) {
    throw std::invalid_argument("scale_translate: rho must be positive");
  }
  ConvexBody out;
  out.dirs = a.dirs;
  out.support.resize(a.support.size());
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    out.support[i] = rho * a.support[i] + dot(xi, a.dirs->dirs[i]);
  }
  if (const auto* bf = std::get_if<BallForm>(&a.exact)) {
    out.exact = BallForm{rho * bf->center + xi, rho * bf->radius};
  } else if (const auto* pf = std::get_if<PolygonForm>(&a.exact)) {
    PolygonForm p;
    p.vertices.reserve(pf->vertices.size());
    for (const Vec& v : pf->vertices) p.vertices.push_back(rho * v + xi);
    out.exact = std::move(p);
  }
  return out;
}

HomothetyFit homothety_fit(const ConvexBody& a, const ConvexBody& b) {
  require_same_grid(a, b, "homothety_fit");
  const int dim = a.dirs->dim;
  const int m = 1 + dim;
  std::vector<double> G(static_cast<std::size_t>(m * m), 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < a.dirs->count(); ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    const Vec& th = a.dirs->dirs[si];
    const double ha = a.support[si], hb = b.support[si];
    G[0] += ha * ha;
    rhs[0] += ha * hb;
    for (int d = 0; d < dim; ++d) {
      G[static_cast<std::size_t>(d + 1)] += ha * th[d];
      G[static_cast<std::size_t>((d + 1) * m)] += ha * th[d];
      rhs[static_cast<std::size_t>(d + 1)] += hb * th[d];
      for (int e = 0; e < dim; ++e) {
        G[static_cast<std::size_t>((d + 1) * m + e + 1)] += th[d] * th[e];
      }
    }
  }
  solve_dense(G, rhs, m);
  HomothetyFit fit;
  fit.rho = rhs[0];
  for (int d = 0; d < dim; ++d) fit.xi[d] = rhs[static_cast<std::size_t>(d + 1)];
  fit.valid = fit.rho > 0.0;
  double res = 0.0;
  for (int i = 0; i < a.dirs->count(); ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    const double pred =
        fit.rho * a.support[si] + dot(fit.xi, a.dirs->dirs[si]);
    res = std::max(res, std::abs(b.support[si] - pred));
  }
  fit.residual = res;
  return fit;
}

bool contains(const ConvexBody& a, const Vec& x) {
  if (const auto* bf = std::get_if<BallForm>(&a.exact)) {
    return dist(x, bf->center) <= bf->radius + 1e-12;
  }
  if (const auto* pf = std::get_if<PolygonForm>(&a.exact)) {
    const std::size_t n = pf->vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec& v0 = pf->vertices[i];
      const Vec& v1 = pf->vertices[(i + 1) % n];
      if (cross2(v0, v1, x) < -1e-12) return false;
    }
    return true;
  }
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    if (dot(x, a.dirs->dirs[i]) > a.support[i] + 1e-12) return false;
  }
  return true;
}

double diameter(const ConvexBody& a) {
  double d = 0.0;
  for (int i = 0; i < a.dirs->count(); ++i) {
    d = std::max(d, a.support_at(i) + a.support_at(a.dirs->antipode(i)));
  }
  return d;
}

Vec support_center(const ConvexBody& a) {
  if (const auto* bf = std::get_if<BallForm>(&a.exact)) return bf->center;
  Vec c;
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    c += a.support[i] * a.dirs->dirs[i];
  }
  const double scale = static_cast<double>(a.dirs->dim) /
                       static_cast<double>(a.dirs->count());
  return scale * c;
}

double circumradius(const ConvexBody& a, const Vec& center) {
  double r = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    r = std::max(r, a.support[i] - dot(center, a.dirs->dirs[i]));
  }
  return r;
}

double inradius(const ConvexBody& a, const Vec& center) {
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    r = std::min(r, a.support[i] - dot(center, a.dirs->dirs[i]));
  }
  return r;
}

double support_consistency_residual(const ConvexBody& a) {
  if (a.dirs->dim != 2) return 0.0;  // 3-d bodies are balls here
  const int m = a.dirs->count();
  const double c = std::cos(2.0 * std::numbers::pi / m);
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const double prev = a.support_at((i + m - 1) % m);
    const double next = a.support_at((i + 1) % m);
    worst = std::max(worst, 2.0 * c * a.support_at(i) - prev - next);
  }
  return worst;
}

}  // namespace pcap
