#include "irl/trajectory.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace irl::trajectory {

QuinticPoly solve_lateral_quintic(double d0, double d0_dot, double d0_ddot, double dT, double T) {
  if (!(T > 0.0)) throw TrajectoryError("quintic duration must be positive, got " + std::to_string(T));
  const double a0 = d0;
  const double a1 = d0_dot;
  const double a2 = 0.5 * d0_ddot;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;

  Eigen::Matrix3d A;
  A << T3, T4, T5,
       3 * T2, 4 * T3, 5 * T4,
       6 * T, 12 * T2, 20 * T3;
  const Eigen::Vector3d b(dT - (a0 + a1 * T + a2 * T2),
                          0.0 - (a1 + 2 * a2 * T),
                          0.0 - 2 * a2);
  const Eigen::Vector3d x = A.fullPivLu().solve(b);
  return QuinticPoly({a0, a1, a2, x[0], x[1], x[2]}, T);
}

QuarticPoly solve_longitudinal_quartic(double s0, double s0_dot, double s0_ddot, double vT,
                                       double T) {
  if (!(T > 0.0)) throw TrajectoryError("quartic duration must be positive, got " + std::to_string(T));
  const double a0 = s0;
  const double a1 = s0_dot;
  const double a2 = 0.5 * s0_ddot;
  const double T2 = T * T, T3 = T2 * T;

  Eigen::Matrix2d A;
  A << 3 * T2, 4 * T3,
       6 * T, 12 * T2;
  const Eigen::Vector2d b(vT - (a1 + 2 * a2 * T), 0.0 - 2 * a2);
  const Eigen::Vector2d x = A.fullPivLu().solve(b);
  return QuarticPoly({a0, a1, a2, x[0], x[1]}, T);
}

Trajectory generate_trajectory(const geometry::FrenetPose& current, const TerminalManifold& manifold,
                               const geometry::ReferencePath& path, double dt) {
  if (!(dt > 0.0)) throw TrajectoryError("sample step must be positive");
  if (!(manifold.t > 0.0)) throw TrajectoryError("manifold duration must be positive");
  if (manifold.v < 0.0) throw TrajectoryError("manifold speed must be non-negative");

  const QuinticPoly lateral =
      solve_lateral_quintic(current.d, current.d_dot, current.d_ddot, manifold.d, manifold.t);
  const QuarticPoly longitudinal =
      solve_longitudinal_quartic(current.s, current.s_dot, current.s_ddot, manifold.v, manifold.t);

  Trajectory traj;
  traj.source_manifold = manifold;
  const auto steps = static_cast<std::size_t>(std::floor(manifold.t / dt + 1e-9));
  traj.samples.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    TrajectorySample sample;
    sample.time = t;
    if (i == 0) {
      sample.frenet = current;
    } else {
      sample.frenet.s = longitudinal.value(t);
      sample.frenet.s_dot = longitudinal.derivative(t, 1);
      sample.frenet.s_ddot = longitudinal.derivative(t, 2);
      sample.frenet.d = lateral.value(t);
      sample.frenet.d_dot = lateral.derivative(t, 1);
      sample.frenet.d_ddot = lateral.derivative(t, 2);
    }
    if (sample.frenet.s > path.total_length()) break;
    sample.position = path.to_cartesian(sample.frenet.s, sample.frenet.d);
    sample.speed = std::hypot(sample.frenet.s_dot, sample.frenet.d_dot);
    traj.samples.push_back(sample);
  }
  return traj;
}

std::array<TerminalManifold, 3> candidate_manifolds(double current_d, double lane_width,
                                                    double v_const, double t_const) {
  const double half = 0.5 * lane_width;
  if (current_d < half) {
    return {TerminalManifold{v_const, 0.0, t_const}, TerminalManifold{v_const, half, t_const},
            TerminalManifold{v_const, lane_width, t_const}};
  }
  return {TerminalManifold{v_const, lane_width, t_const}, TerminalManifold{v_const, half, t_const},
          TerminalManifold{v_const, 0.0, t_const}};
}

}  // namespace irl::trajectory
