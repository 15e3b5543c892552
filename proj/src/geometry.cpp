#include "irl/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace irl::geometry {

namespace {

Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  return {v.x / n, v.y / n};
}

// Roots of a2*x^2 + a1*x + a0 = 0, written to stay accurate as a2 -> 0.
int solve_quadratic(double a2, double a1, double a0, std::array<double, 2>& roots) {
  const double scale = std::max({std::abs(a2), std::abs(a1), std::abs(a0)});
  if (scale == 0.0) return 0;
  if (std::abs(a2) <= 1e-14 * scale) {
    if (a1 == 0.0) return 0;
    roots[0] = -a0 / a1;
    return 1;
  }
  const double disc = a1 * a1 - 4.0 * a2 * a0;
  if (disc < 0.0) return 0;
  const double q = -0.5 * (a1 + std::copysign(std::sqrt(disc), a1));
  int n = 0;
  roots[n++] = q / a2;
  if (q != 0.0) roots[n++] = a0 / q;
  return n;
}

}  // namespace

ReferencePath ReferencePath::build(std::span<const Vec2> waypoints) {
  if (waypoints.size() < 2) {
    throw GeometryError("reference path needs at least 2 waypoints, got " +
                        std::to_string(waypoints.size()));
  }
  ReferencePath path;
  path.points_.push_back(waypoints[0]);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Vec2 a = waypoints[i - 1];
    const Vec2 b = waypoints[i];
    const double len = distance(a, b);
    if (len <= 0.0) {
      throw GeometryError("zero-length segment at waypoint " + std::to_string(i));
    }
    const auto pieces = static_cast<std::size_t>(std::floor(len / kMaxSegmentLength)) + 1;
    for (std::size_t k = 1; k < pieces; ++k) {
      const double f = static_cast<double>(k) / static_cast<double>(pieces);
      path.points_.push_back(a + f * (b - a));
    }
    path.points_.push_back(b);
  }

  const std::size_t n = path.points_.size();
  path.cumulative_s_.resize(n);
  path.cumulative_s_[0] = 0.0;
  std::vector<Vec2> seg_normals(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 e = path.points_[i + 1] - path.points_[i];
    path.cumulative_s_[i + 1] = path.cumulative_s_[i] + norm(e);
    seg_normals[i] = rotate_left(normalized(e));
  }
  path.vertex_normals_.resize(n);
  path.vertex_normals_[0] = seg_normals.front();
  path.vertex_normals_[n - 1] = seg_normals.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Vec2 sum = seg_normals[i - 1] + seg_normals[i];
    if (norm(sum) < 1e-9) {
      throw GeometryError("path reverses direction at waypoint " + std::to_string(i));
    }
    path.vertex_normals_[i] = normalized(sum);
  }
  return path;
}

ReferencePath::SegmentRef ReferencePath::locate(double s) const {
  if (!(s >= 0.0 && s <= total_length())) {
    throw GeometryError("arc length " + std::to_string(s) + " outside [0, " +
                        std::to_string(total_length()) + "]");
  }
  auto it = std::upper_bound(cumulative_s_.begin(), cumulative_s_.end(), s);
  std::size_t idx = it == cumulative_s_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_s_.begin()) - 1;
  idx = std::min(idx, segment_count() - 1);
  const double len = cumulative_s_[idx + 1] - cumulative_s_[idx];
  return {idx, (s - cumulative_s_[idx]) / len};
}

Vec2 ReferencePath::point_at(double s) const {
  const auto [i, alpha] = locate(s);
  return points_[i] + alpha * (points_[i + 1] - points_[i]);
}

Vec2 ReferencePath::tangent_at(double s) const {
  const auto [i, alpha] = locate(s);
  (void)alpha;
  return normalized(points_[i + 1] - points_[i]);
}

double ReferencePath::heading_at(double s) const {
  const Vec2 t = tangent_at(s);
  return std::atan2(t.y, t.x);
}

Vec2 ReferencePath::lateral_at(double s) const {
  const auto [i, alpha] = locate(s);
  return (1.0 - alpha) * vertex_normals_[i] + alpha * vertex_normals_[i + 1];
}

double ReferencePath::curvature_at(double s) const {
  const auto [i, alpha] = locate(s);
  (void)alpha;
  const std::size_t lo = i == 0 ? 0 : i - 1;
  const std::size_t hi = std::min(i + 1, segment_count() - 1);
  if (lo == hi) return 0.0;
  const Vec2 t0 = normalized(points_[lo + 1] - points_[lo]);
  const Vec2 t1 = normalized(points_[hi + 1] - points_[hi]);
  const double turn = std::atan2(cross(t0, t1), dot(t0, t1));
  const double ds = 0.5 * (cumulative_s_[hi + 1] + cumulative_s_[hi]) -
                    0.5 * (cumulative_s_[lo + 1] + cumulative_s_[lo]);
  return turn / ds;
}

Vec2 ReferencePath::to_cartesian(double s, double d) const {
  if (std::abs(d) > kCorridorHalfWidth) {
    throw GeometryError("lateral offset " + std::to_string(d) + " outside corridor");
  }
  const auto [i, alpha] = locate(s);
  const Vec2 base = points_[i] + alpha * (points_[i + 1] - points_[i]);
  const Vec2 lateral = (1.0 - alpha) * vertex_normals_[i] + alpha * vertex_normals_[i + 1];
  return base + d * lateral;
}

FrenetPoint ReferencePath::to_frenet(Vec2 p) const {
  // Per segment, find alpha in [0,1] such that p - P(alpha) is parallel to the
  // blended lateral N(alpha). That is a quadratic in alpha.
  constexpr double kAlphaSlack = 1e-12;
  double best_abs_d = std::numeric_limits<double>::infinity();
  FrenetPoint best{};
  const std::size_t segs = segment_count();
  for (std::size_t i = 0; i < segs; ++i) {
    const Vec2 a = points_[i];
    const Vec2 e = points_[i + 1] - a;
    const double len = cumulative_s_[i + 1] - cumulative_s_[i];
    const Vec2 q = p - a;
    // Cheap reject: farther from the segment than corridor + segment length.
    if (norm(q - 0.5 * e) > kCorridorHalfWidth + len) continue;
    const Vec2 na = vertex_normals_[i];
    const Vec2 dn = vertex_normals_[i + 1] - na;
    std::array<double, 2> roots{};
    const int count = solve_quadratic(-cross(e, dn), cross(q, dn) - cross(e, na), cross(q, na), roots);
    for (int r = 0; r < count; ++r) {
      double alpha = roots[r];
      if (alpha < -kAlphaSlack || alpha > 1.0 + kAlphaSlack) continue;
      alpha = std::clamp(alpha, 0.0, 1.0);
      const Vec2 lateral = na + alpha * dn;
      const double d = dot(q - alpha * e, lateral) / dot(lateral, lateral);
      if (std::abs(d) < best_abs_d) {
        best_abs_d = std::abs(d);
        best = {cumulative_s_[i] + alpha * len, d};
      }
    }
  }
  if (best_abs_d > kCorridorHalfWidth) {
    throw GeometryError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") outside the path corridor");
  }
  return best;
}

ReferencePath build_reference_path(std::span<const Vec2> waypoints) {
  return ReferencePath::build(waypoints);
}

FrenetPoint cartesian_to_frenet(const ReferencePath& path, Vec2 point) {
  return path.to_frenet(point);
}

Vec2 frenet_to_cartesian(const ReferencePath& path, double s, double d) {
  return path.to_cartesian(s, d);
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 f{std::cos(heading), std::sin(heading)};
  const Vec2 l = rotate_left(f);
  const Vec2 hf = 0.5 * length * f;
  const Vec2 hl = 0.5 * width * l;
  return {center + hf + hl, center - hf + hl, center - hf - hl, center + hf - hl};
}

bool overlaps(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes{Vec2{std::cos(a.heading), std::sin(a.heading)},
                                 Vec2{-std::sin(a.heading), std::cos(a.heading)},
                                 Vec2{std::cos(b.heading), std::sin(b.heading)},
                                 Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  for (const Vec2& axis : axes) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (const Vec2& c : ca) {
      const double p = dot(c, axis);
      amin = std::min(amin, p);
      amax = std::max(amax, p);
    }
    for (const Vec2& c : cb) {
      const double p = dot(c, axis);
      bmin = std::min(bmin, p);
      bmax = std::max(bmax, p);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

}  // namespace irl::geometry
