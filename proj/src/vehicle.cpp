#include "irl/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace irl::world {

using geometry::Vec2;

VehicleState step_vehicle(const VehicleState& state, Controls controls, double dt,
                          const VehicleLimits& limits) {
  const double accel = std::clamp(controls.accel, limits.accel_min, limits.accel_max);
  const double steer = std::clamp(controls.steer, -limits.steer_max, limits.steer_max);
  VehicleState next = state;
  next.position.x += state.speed * std::cos(state.heading) * dt;
  next.position.y += state.speed * std::sin(state.heading) * dt;
  next.heading += state.speed / limits.wheelbase * std::tan(steer) * dt;
  next.speed = std::clamp(state.speed + accel * dt, 0.0, limits.speed_max);
  return next;
}

void refresh_frenet(VehicleState& state, const geometry::ReferencePath& path) {
  const geometry::FrenetPoint fp = path.to_frenet(state.position);
  const double relative = state.heading - path.heading_at(fp.s);
  state.frenet.s = fp.s;
  state.frenet.d = fp.d;
  state.frenet.s_dot = state.speed * std::cos(relative);
  state.frenet.d_dot = state.speed * std::sin(relative);
  state.frenet.s_ddot = 0.0;
  state.frenet.d_ddot = 0.0;
}

geometry::OrientedBox footprint(const VehicleState& state, const VehicleLimits& limits) {
  return {state.position, state.heading, limits.length, limits.width};
}

double PidController::update(double error, double dt) {
  integral_ += error * dt;
  const double derivative = primed_ ? (error - previous_error_) / dt : 0.0;
  previous_error_ = error;
  primed_ = true;
  return gains_.kp * error + gains_.ki * integral_ + gains_.kd * derivative;
}

void PidController::reset() {
  integral_ = 0.0;
  previous_error_ = 0.0;
  primed_ = false;
}

TrajectoryTracker::TrajectoryTracker(TrackerGains gains)
    : gains_(gains), longitudinal_(gains.longitudinal), lateral_(gains.lateral) {}

void TrajectoryTracker::follow(const trajectory::Trajectory& trajectory) {
  trajectory_ = trajectory;
  longitudinal_.reset();
  lateral_.reset();
  elapsed_ = 0.0;
}

Controls TrajectoryTracker::track(const VehicleState& state, double dt) {
  if (trajectory_.samples.empty()) return {};
  const double target_speed = trajectory_speed_at(trajectory_, elapsed_);
  const Vec2 target = trajectory_point_at(trajectory_, elapsed_ + gains_.lookahead);
  const Vec2 left{-std::sin(state.heading), std::cos(state.heading)};
  const double lateral_error = geometry::dot(target - state.position, left);

  Controls c;
  c.accel = longitudinal_.update(target_speed - state.speed, dt);
  c.steer = lateral_.update(lateral_error, dt);
  elapsed_ += dt;
  return c;
}

namespace {

// Index i such that samples[i].time <= t < samples[i+1].time, clamped.
std::size_t bracket(const trajectory::Trajectory& traj, double t) {
  const auto& s = traj.samples;
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const trajectory::TrajectorySample& x) { return value < x.time; });
  if (it == s.begin()) return 0;
  return std::min(static_cast<std::size_t>(it - s.begin()) - 1, s.size() - 1);
}

}  // namespace

Vec2 trajectory_point_at(const trajectory::Trajectory& traj, double t) {
  const auto& s = traj.samples;
  if (s.size() == 1) return s.front().position;
  if (t >= s.back().time) {
    const Vec2 dir = s.back().position - s[s.size() - 2].position;
    const double len = geometry::norm(dir);
    if (len == 0.0) return s.back().position;
    return s.back().position + ((t - s.back().time) * s.back().speed / len) * dir;
  }
  const std::size_t i = bracket(traj, t);
  const double span = s[i + 1].time - s[i].time;
  const double f = span > 0.0 ? (t - s[i].time) / span : 0.0;
  return s[i].position + f * (s[i + 1].position - s[i].position);
}

double trajectory_speed_at(const trajectory::Trajectory& traj, double t) {
  const auto& s = traj.samples;
  if (t >= s.back().time || s.size() == 1) return s.back().speed;
  const std::size_t i = bracket(traj, t);
  const double span = s[i + 1].time - s[i].time;
  const double f = span > 0.0 ? (t - s[i].time) / span : 0.0;
  return s[i].speed + f * (s[i + 1].speed - s[i].speed);
}

double cross_track_error(const trajectory::Trajectory& traj, Vec2 p) {
  const auto& s = traj.samples;
  if (s.size() == 1) return geometry::distance(s.front().position, p);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const Vec2 a = s[i].position;
    const Vec2 e = s[i + 1].position - a;
    const double len2 = geometry::dot(e, e);
    const double f = len2 > 0.0 ? std::clamp(geometry::dot(p - a, e) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, geometry::distance(a + f * e, p));
  }
  return best;
}

Controls pid_track(const VehicleState& state, const trajectory::Trajectory& trajectory, double dt,
                   const TrackerGains& gains) {
  TrajectoryTracker tracker(gains);
  tracker.follow(trajectory);
  return tracker.track(state, dt);
}

}  // namespace irl::world
