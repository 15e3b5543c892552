#pragma once

#include "irl/geometry.hpp"
#include "irl/trajectory.hpp"

namespace irl::world {

struct VehicleState {
  geometry::Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  geometry::FrenetPose frenet;  // cached projection onto the scenario path
};

struct Controls {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // front wheel angle, rad
};

struct VehicleLimits {
  double wheelbase = 2.7;
  double accel_min = -4.0;
  double accel_max = 3.0;
  double steer_max = 0.5;
  double speed_max = 15.0;
  double length = 4.5;
  double width = 2.0;
};

/// Kinematic bicycle, explicit Euler. The cached Frenet pose is carried over
/// unchanged; callers re-project against their path.
VehicleState step_vehicle(const VehicleState& state, Controls controls, double dt,
                          const VehicleLimits& limits);

/// Recomputes the Frenet cache (s, d and their rates) from the Cartesian
/// state. Throws geometry::GeometryError outside the corridor.
void refresh_frenet(VehicleState& state, const geometry::ReferencePath& path);

/// Vehicle footprint for collision tests.
geometry::OrientedBox footprint(const VehicleState& state, const VehicleLimits& limits);

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

struct TrackerGains {
  PidGains longitudinal{1.2, 0.05, 0.01};
  // No derivative term: the vehicle-frame error moves with every heading
  // change, and at dt = 0.1 a kd of 0.15 turns that into a steering
  // oscillation above about 6 m/s.
  PidGains lateral{0.4, 0.0, 0.0};
  double lookahead = 0.5;  // s
};

class PidController {
 public:
  explicit PidController(PidGains gains = {}) : gains_(gains) {}

  double update(double error, double dt);
  void reset();

 private:
  PidGains gains_;
  double integral_ = 0.0;
  double previous_error_ = 0.0;
  bool primed_ = false;
};

/// Follows one trajectory from its start: a speed PID on the time-indexed
/// target speed and a steering PID on the lateral offset, in the vehicle
/// frame, of the trajectory point one lookahead ahead.
class TrajectoryTracker {
 public:
  explicit TrajectoryTracker(TrackerGains gains = {});

  /// Starts tracking `trajectory` at its time 0 and clears controller memory.
  void follow(const trajectory::Trajectory& trajectory);

  /// Controls for the current state; advances the internal clock by dt.
  Controls track(const VehicleState& state, double dt);

  double elapsed() const { return elapsed_; }
  const TrackerGains& gains() const { return gains_; }
  const trajectory::Trajectory& trajectory() const { return trajectory_; }

 private:
  TrackerGains gains_;
  trajectory::Trajectory trajectory_;
  PidController longitudinal_;
  PidController lateral_;
  double elapsed_ = 0.0;
};

/// Interpolated trajectory point at time t. Past the end the last sample is
/// extrapolated along its direction of travel at its speed.
geometry::Vec2 trajectory_point_at(const trajectory::Trajectory& trajectory, double t);
double trajectory_speed_at(const trajectory::Trajectory& trajectory, double t);

/// Distance from a point to the trajectory polyline.
double cross_track_error(const trajectory::Trajectory& trajectory, geometry::Vec2 point);

/// One-shot form: controls for `state` tracking `trajectory` from its start
/// (fresh controller memory).
Controls pid_track(const VehicleState& state, const trajectory::Trajectory& trajectory, double dt,
                   const TrackerGains& gains);

}  // namespace irl::world
