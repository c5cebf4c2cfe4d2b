#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "pcap/vec.hpp"

namespace pcap {

/// Unit directions sampling S^(n-1). Uniform angles for n=2 (count must be
/// a multiple of 4 so axes and antipodes are present); a Fibonacci covering
/// for n=3.
struct DirectionGrid {
  int dim = 2;
  std::vector<Vec> dirs;

  int count() const { return static_cast<int>(dirs.size()); }
  /// Index of -dirs[i]; exact for n=2, nearest direction for n=3.
  int antipode(int i) const;
};

std::shared_ptr<const DirectionGrid> make_direction_grid(int dim, int count);

struct BallForm {
  Vec center;
  double radius = 0.0;
};

struct PolygonForm {
  std::vector<Vec> vertices;  // convex hull, counter-clockwise
};

/// Convex body stored as its support function sampled on a shared
/// DirectionGrid, with an optional exact form used for analytic point
/// membership tests.
struct ConvexBody {
  std::shared_ptr<const DirectionGrid> dirs;
  std::vector<double> support;
  std::variant<std::monostate, BallForm, PolygonForm> exact;

  double support_at(int i) const { return support[static_cast<std::size_t>(i)]; }
};

struct HomothetyFit {
  double rho = 0.0;
  Vec xi;
  double residual = 0.0;  // max over directions of |h_B - rho*h_A - <xi,theta>|
  bool valid = true;      // false when the least-squares fit gave rho <= 0
};

ConvexBody make_ball(const Vec& center, double radius,
                     std::shared_ptr<const DirectionGrid> dirs);

/// n=2 only. Vertices are hulled first; collinear input is rejected.
ConvexBody make_polygon(const std::vector<Vec>& vertices,
                        std::shared_ptr<const DirectionGrid> dirs);

/// Axis-aligned ellipse, h(theta) = <c,theta> + sqrt(a^2 th1^2 + b^2 th2^2).
ConvexBody make_ellipse(const Vec& center, double a, double b,
                        std::shared_ptr<const DirectionGrid> dirs);

/// Body with support h built from an explicit point set (its convex hull).
ConvexBody body_from_points(const std::vector<Vec>& points,
                            std::shared_ptr<const DirectionGrid> dirs);

/// (1-lambda) A + lambda B in the Minkowski sense; supports combine linearly.
ConvexBody minkowski_combination(const ConvexBody& a, const ConvexBody& b,
                                 double lambda);

ConvexBody scale_translate(const ConvexBody& a, double rho, const Vec& xi);

/// Least-squares fit of h_B ~ rho h_A + <xi,theta> over the direction grid.
HomothetyFit homothety_fit(const ConvexBody& a, const ConvexBody& b);

bool contains(const ConvexBody& a, const Vec& x);

double diameter(const ConvexBody& a);

/// Support-weighted center estimate: n * mean(h_i theta_i). Exact for balls.
Vec support_center(const ConvexBody& a);

/// Circumscribed radius around `center`: max_i (h_i - <center, theta_i>).
double circumradius(const ConvexBody& a, const Vec& center);

/// Inscribed radius around `center`: min_i (h_i - <center, theta_i>).
double inradius(const ConvexBody& a, const Vec& center);

/// n=2 consistency of the sampled support with convexity:
/// max_i max(0, 2 h_i cos(dphi) - h_{i-1} - h_{i+1}). Zero (up to round-off)
/// exactly when h is the support function of its halfplane intersection.
double support_consistency_residual(const ConvexBody& a);

/// Monotone-chain hull, counter-clockwise, n=2.
std::vector<Vec> convex_hull_2d(std::vector<Vec> points);

}  // namespace pcap
