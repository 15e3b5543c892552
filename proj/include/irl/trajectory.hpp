#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "irl/geometry.hpp"

namespace irl::trajectory {

class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target end-state family A{v, d, t}.
struct TerminalManifold {
  double v = 0.0;  // terminal speed, m/s
  double d = 0.0;  // terminal lateral offset, m
  double t = 0.0;  // time to reach the target, s

  friend bool operator==(const TerminalManifold&, const TerminalManifold&) = default;
};

/// Polynomial in time, valid on [0, duration]. Coefficients low order first.
template <std::size_t Degree>
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::array<double, Degree + 1> coefficients, double duration)
      : coefficients_(coefficients), duration_(duration) {}

  const std::array<double, Degree + 1>& coefficients() const { return coefficients_; }
  double duration() const { return duration_; }

  /// Value of the n-th time derivative at t (Horner on the differentiated
  /// coefficients).
  double derivative(double t, int n = 0) const {
    double acc = 0.0;
    for (std::size_t k = Degree + 1; k-- > static_cast<std::size_t>(n);) {
      double factor = 1.0;
      for (int j = 0; j < n; ++j) factor *= static_cast<double>(k - static_cast<std::size_t>(j));
      acc = acc * t + factor * coefficients_[k];
    }
    return acc;
  }
  double value(double t) const { return derivative(t, 0); }

 private:
  std::array<double, Degree + 1> coefficients_{};
  double duration_ = 0.0;
};

using QuinticPoly = Polynomial<5>;
using QuarticPoly = Polynomial<4>;

/// Lateral profile: d(0), d'(0), d''(0) given; d(T) = dT, d'(T) = d''(T) = 0.
QuinticPoly solve_lateral_quintic(double d0, double d0_dot, double d0_ddot, double dT, double T);

/// Velocity-keeping longitudinal profile: s(0), s'(0), s''(0) given;
/// s'(T) = vT, s''(T) = 0, terminal position free.
QuarticPoly solve_longitudinal_quartic(double s0, double s0_dot, double s0_ddot, double vT,
                                       double T);

struct TrajectorySample {
  double time = 0.0;
  geometry::FrenetPose frenet;
  geometry::Vec2 position;
  double speed = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  TerminalManifold source_manifold;

  double duration() const { return samples.empty() ? 0.0 : samples.back().time; }
};

/// Samples both profiles on [0, t] at step dt and maps them to Cartesian.
/// Sampling stops at the end of the path.
Trajectory generate_trajectory(const geometry::FrenetPose& current, const TerminalManifold& manifold,
                               const geometry::ReferencePath& path, double dt);

/// Dynamic three-action set. Index 0 keeps the current lane, index 1
/// straddles the centre line, index 2 moves to the other lane.
std::array<TerminalManifold, 3> candidate_manifolds(double current_d, double lane_width,
                                                    double v_const, double t_const);

}  // namespace irl::trajectory
