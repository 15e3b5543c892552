#include "irl/environment.hpp"

#include <algorithm>
#include <cmath>

namespace irl::world {

using geometry::Vec2;

int action_count(ActionMode mode) {
  return mode == ActionMode::Trajectory ? kTrajectoryActionCount : kControlActionCount;
}

std::pair<double, double> control_action(int index) {
  if (index < 0 || index >= kControlActionCount) {
    throw EnvironmentError("control action index " + std::to_string(index) + " out of range");
  }
  return {kControlAccels[static_cast<std::size_t>(index / 3)], kControlYawRates[static_cast<std::size_t>(index % 3)]};
}

geometry::OrientedBox obstacle_box(const Scenario& sc) {
  if (!sc.obstacle) throw EnvironmentError("scenario has no obstacle");
  const Obstacle& o = *sc.obstacle;
  return {sc.path.point_at(o.s_center), sc.path.heading_at(o.s_center), o.length, o.width};
}

ltl::State eval_atoms(const VehicleState& state, const Scenario& sc, const VehicleLimits& limits) {
  const double d = state.frenet.d;
  bool collision = false;
  if (sc.obstacle) collision = geometry::overlaps(footprint(state, limits), obstacle_box(sc));
  return {{kNoCollision, !collision},
          {kInLane, std::abs(d) <= 0.5 * sc.lane_width},
          {kNoOutRoad, std::abs(d) <= 1.5 * sc.lane_width}};
}

bool rulebook_active(const VehicleState& state, const Scenario& sc, const WorldConfig& config) {
  if (!sc.obstacle) return false;
  const double ahead = sc.obstacle->s_center - state.frenet.s;
  return ahead >= -config.activation_behind && ahead <= config.activation_ahead;
}

namespace {

using Grid = ObservationGrid;

// Ego frame: forward along heading, left positive. Cell centres sit on
// multiples of the resolution relative to the ego.
struct EgoFrame {
  Vec2 origin;
  Vec2 forward;
  Vec2 left;

  // Continuous (row, col) with cell centres at integers.
  std::pair<double, double> to_grid(Vec2 p) const {
    const Vec2 rel = p - origin;
    const double f = geometry::dot(rel, forward) / Grid::kResolution;
    const double l = geometry::dot(rel, left) / Grid::kResolution;
    return {Grid::kEgoRow - f, Grid::kEgoCol - l};
  }
};

// Marks cells whose centres lie inside a convex polygon given in grid coords
// (counter-clockwise or clockwise).
template <std::size_t N>
void fill_convex(Grid& grid, int channel, const std::array<std::pair<double, double>, N>& poly) {
  double rmin = 1e9, rmax = -1e9, cmin = 1e9, cmax = -1e9;
  for (const auto& [r, c] : poly) {
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  const int r0 = std::max(0, static_cast<int>(std::ceil(rmin)));
  const int r1 = std::min(Grid::kSize - 1, static_cast<int>(std::floor(rmax)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(cmin)));
  const int c1 = std::min(Grid::kSize - 1, static_cast<int>(std::floor(cmax)));
  if (r0 > r1 || c0 > c1) return;
  double orientation = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& [ar, ac] = poly[i];
    const auto& [br, bc] = poly[(i + 1) % N];
    orientation += ar * bc - br * ac;
  }
  const double sign = orientation >= 0.0 ? 1.0 : -1.0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      bool inside = true;
      for (std::size_t i = 0; i < N && inside; ++i) {
        const auto& [ar, ac] = poly[i];
        const auto& [br, bc] = poly[(i + 1) % N];
        const double side = (br - ar) * (c - ac) - (bc - ac) * (r - ar);
        if (sign * side < 0.0) inside = false;
      }
      if (inside) grid.at(channel, r, c) = 1.0f;
    }
  }
}

void fill_box(Grid& grid, int channel, const EgoFrame& frame, const geometry::OrientedBox& box) {
  const auto corners = box.corners();
  std::array<std::pair<double, double>, 4> poly;
  for (std::size_t i = 0; i < 4; ++i) poly[i] = frame.to_grid(corners[i]);
  fill_convex(grid, channel, poly);
}

void mark_point(Grid& grid, int channel, std::pair<double, double> rc) {
  const int r = static_cast<int>(std::lround(rc.first));
  const int c = static_cast<int>(std::lround(rc.second));
  if (r >= 0 && r < Grid::kSize && c >= 0 && c < Grid::kSize) grid.at(channel, r, c) = 1.0f;
}

}  // namespace

ObservationGrid render_observation(const VehicleState& state, const Scenario& sc,
                                   const trajectory::Trajectory* planned, const VehicleLimits& limits) {
  Grid grid;
  const EgoFrame frame{state.position, {std::cos(state.heading), std::sin(state.heading)},
                       {-std::sin(state.heading), std::cos(state.heading)}};

  // Road: ego lane plus oncoming lane, d in [-w/2, 3w/2].
  const double d_lo = -0.5 * sc.lane_width;
  const double d_hi = 1.5 * sc.lane_width;
  const double view = Grid::kSize * Grid::kResolution * 1.5;
  const auto& cum = sc.path.cumulative_s();
  const auto& pts = sc.path.waypoints();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (cum[i + 1] < state.frenet.s - view || cum[i] > state.frenet.s + view) continue;
    const std::array<std::pair<double, double>, 4> quad{
        frame.to_grid(sc.path.to_cartesian(cum[i], d_lo)), frame.to_grid(sc.path.to_cartesian(cum[i], d_hi)),
        frame.to_grid(sc.path.to_cartesian(cum[i + 1], d_hi)),
        frame.to_grid(sc.path.to_cartesian(cum[i + 1], d_lo))};
    fill_convex(grid, Grid::Road, quad);
  }

  if (sc.obstacle) fill_box(grid, Grid::Obstacles, frame, obstacle_box(sc));

  fill_box(grid, Grid::EgoAndPlan, frame, footprint(state, limits));
  if (planned != nullptr && !planned->samples.empty()) {
    const auto& s = planned->samples;
    mark_point(grid, Grid::EgoAndPlan, frame.to_grid(s.front().position));
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const double len = geometry::distance(s[i].position, s[i + 1].position);
      const int pieces = std::max(1, static_cast<int>(std::ceil(len / (0.25 * Grid::kResolution))));
      for (int k = 1; k <= pieces; ++k) {
        const double f = static_cast<double>(k) / pieces;
        mark_point(grid, Grid::EgoAndPlan, frame.to_grid(s[i].position + f * (s[i + 1].position - s[i].position)));
      }
    }
  }
  return grid;
}

VehicleState initial_state(const Scenario& sc) {
  VehicleState st;
  st.position = sc.path.point_at(0.0);
  st.heading = sc.path.heading_at(0.0);
  st.speed = 0.0;
  refresh_frenet(st, sc.path);
  return st;
}

Environment::Environment(WorldConfig config, ActionMode mode, TraceMode trace_mode)
    : config_(config), mode_(mode), trace_mode_(trace_mode), tracker_(config.tracker) {
  if (!(config_.dt > 0.0)) throw EnvironmentError("dt must be positive");
  if (config_.step_budget < 1) throw EnvironmentError("step budget must be at least 1");
}

ObservationGrid Environment::reset(const Scenario& scenario) {
  scenario_ = scenario;
  state_ = initial_state(scenario_);
  last_trajectory_.reset();
  steps_ = 0;
  time_ = 0.0;
  done_ = false;
  return observe();
}

ObservationGrid Environment::observe() const {
  return render_observation(state_, scenario_, last_trajectory_ ? &*last_trajectory_ : nullptr, config_.limits);
}

void Environment::substep(Controls controls, StepOutcome& out) {
  VehicleState next = step_vehicle(state_, controls, config_.dt, config_.limits);
  time_ += config_.dt;
  out.traveled += geometry::distance(state_.position, next.position);
  bool projected = true;
  try {
    refresh_frenet(next, scenario_.path);
  } catch (const geometry::GeometryError&) {
    projected = false;
  }
  state_ = next;
  out.visited.push_back(state_);
  if (!projected) {
    // Left the mapped corridor (behind the start or far off the road).
    out.events.off_road = true;
    out.terminated = true;
    ltl::State atoms{{kNoCollision, true}, {kInLane, false}, {kNoOutRoad, false}};
    out.visited_atoms.push_back(atoms);
    return;
  }
  const ltl::State atoms = eval_atoms(state_, scenario_, config_.limits);
  out.visited_atoms.push_back(atoms);
  if (!atoms.at(kNoCollision)) {
    out.events.collision = true;
    out.terminated = true;
    return;
  }
  if (std::abs(state_.frenet.d) > 1.5 * scenario_.lane_width + config_.offroad_margin) {
    out.events.off_road = true;
    out.terminated = true;
    return;
  }
  if (state_.frenet.s >= scenario_.goal.s_target) {
    out.events.reached_s_target = true;
    out.events.reached_both =
        std::abs(state_.frenet.d - scenario_.goal.d_target) <= config_.d_target_tolerance;
    out.terminated = true;
  }
}

StepOutcome Environment::advance(int action) {
  if (done_) throw EnvironmentError("step called on a terminated environment");
  if (action < 0 || action >= action_count()) {
    throw EnvironmentError("action index " + std::to_string(action) + " out of range");
  }
  StepOutcome out;
  out.step_index = steps_;
  out.visited.push_back(state_);

  if (mode_ == ActionMode::Trajectory) {
    const auto manifolds =
        trajectory::candidate_manifolds(state_.frenet.d, scenario_.lane_width, config_.v_const, config_.t_const);
    last_trajectory_ = trajectory::generate_trajectory(state_.frenet, manifolds[static_cast<std::size_t>(action)],
                                                       scenario_.path, config_.dt);
    tracker_.follow(*last_trajectory_);
    const auto substeps = static_cast<int>(std::lround(config_.t_const / config_.dt));
    for (int k = 0; k < substeps && !out.terminated; ++k) substep(tracker_.track(state_, config_.dt), out);
  } else {
    const auto [accel, yaw_rate] = control_action(action);
    const double steer = std::atan2(yaw_rate * config_.limits.wheelbase, state_.speed);
    substep({accel, steer}, out);
  }

  ++steps_;
  out.state = state_;
  if (trace_mode_ == TraceMode::PerTrajectory) {
    out.trace_states = out.visited_atoms;
  } else {
    out.trace_states = {out.visited_atoms.back()};
  }
  if (!out.terminated && steps_ >= config_.step_budget) out.truncated = true;
  done_ = out.terminated || out.truncated;
  return out;
}

Environment::StepResult Environment::step(int action) {
  StepOutcome outcome = advance(action);
  return {observe(), std::move(outcome)};
}

}  // namespace irl::world
