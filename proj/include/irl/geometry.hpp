#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace irl::geometry {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double k) { return {k * a.x, k * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
/// Counter-clockwise quarter turn (left of travel direction).
constexpr Vec2 rotate_left(Vec2 a) { return {-a.y, a.x}; }

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FrenetPoint {
  double s = 0.0;
  double d = 0.0;
};

/// Frenet-frame kinematic state. d is positive toward the oncoming lane
/// (left of the travel direction).
struct FrenetPose {
  double s = 0.0;
  double d = 0.0;
  double s_dot = 0.0;
  double s_ddot = 0.0;
  double d_dot = 0.0;
  double d_ddot = 0.0;
};

/// Lateral extent of the region where Frenet coordinates are defined.
inline constexpr double kCorridorHalfWidth = 20.0;
/// Segments longer than this are split when a path is built.
inline constexpr double kMaxSegmentLength = 1.0;

/// Arc-length parameterized polyline.
///
/// The lateral direction is the left normal of each segment, blended linearly
/// between vertex normals (vertex normal = bisector of the adjacent segment
/// normals). The blend makes the Frenet map continuous and invertible over
/// the whole corridor, including the wedge on the outside of each vertex.
class ReferencePath {
 public:
  /// Densifies segments of kMaxSegmentLength or more by linear interpolation.
  static ReferencePath build(std::span<const Vec2> waypoints);

  const std::vector<Vec2>& waypoints() const { return points_; }
  const std::vector<double>& cumulative_s() const { return cumulative_s_; }
  double total_length() const { return cumulative_s_.back(); }
  std::size_t segment_count() const { return points_.size() - 1; }

  Vec2 point_at(double s) const;
  /// Unit tangent of the segment containing s.
  Vec2 tangent_at(double s) const;
  double heading_at(double s) const;
  /// Blended lateral direction at s (unit on straight paths, within
  /// cos(turn/2) of unit elsewhere).
  Vec2 lateral_at(double s) const;
  /// Signed curvature estimated from the neighbouring vertex headings.
  double curvature_at(double s) const;

  FrenetPoint to_frenet(Vec2 point) const;
  Vec2 to_cartesian(double s, double d) const;

 private:
  struct SegmentRef {
    std::size_t index;
    double alpha;
  };
  SegmentRef locate(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> cumulative_s_;
  std::vector<Vec2> vertex_normals_;
};

ReferencePath build_reference_path(std::span<const Vec2> waypoints);
FrenetPoint cartesian_to_frenet(const ReferencePath& path, Vec2 point);
Vec2 frenet_to_cartesian(const ReferencePath& path, double s, double d);

/// Oriented rectangle used for footprint tests.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;

  std::array<Vec2, 4> corners() const;
};

/// Separating-axis overlap test. Touching boxes count as overlapping.
bool overlaps(const OrientedBox& a, const OrientedBox& b);

}  // namespace irl::geometry
