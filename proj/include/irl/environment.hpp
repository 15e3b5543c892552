#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "irl/ltl.hpp"
#include "irl/scenario.hpp"
#include "irl/trajectory.hpp"
#include "irl/vehicle.hpp"

namespace irl::world {

class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kNoCollision = "no_collision";
inline constexpr const char* kInLane = "in_lane";
inline constexpr const char* kNoOutRoad = "no_out_road";

enum class ActionMode { Trajectory, Control };
/// Which states a step hands to the rule monitor: every sub-step of the
/// executed trajectory, or only the state the step ends in.
enum class TraceMode { PerTrajectory, PerState };

struct WorldConfig {
  double v_const = 3.5;       // terminal speed of every trajectory action, m/s
  double t_const = 3.0;       // trajectory duration, s
  double dt = 0.1;            // simulation and sampling step, s
  int step_budget = 400;      // env steps per episode
  double offroad_margin = 2.0;
  double activation_ahead = 20.0;   // rulebook window before the obstacle, m
  double activation_behind = 10.0;  // and past it, m
  double d_target_tolerance = 0.5;
  VehicleLimits limits;
  TrackerGains tracker;
};

/// Direct control actions of the control mode: accel x angular velocity.
inline constexpr std::array<double, 3> kControlAccels{-1.0, 0.0, 1.0};
inline constexpr std::array<double, 3> kControlYawRates{-1.0, 0.0, 1.0};
inline constexpr int kTrajectoryActionCount = 3;
inline constexpr int kControlActionCount = 9;

int action_count(ActionMode mode);

/// Control pair for control-mode action index (accel-major).
std::pair<double, double> control_action(int index);

/// Atom truth values of Table-style rules at one state.
ltl::State eval_atoms(const VehicleState& state, const Scenario& scenario, const VehicleLimits& limits = {});

bool rulebook_active(const VehicleState& state, const Scenario& scenario, const WorldConfig& config = {});

geometry::OrientedBox obstacle_box(const Scenario& scenario);

/// Three-plane ego-centric raster, heading aligned. Row 0 is the far edge
/// (ahead of the ego), column 0 the left edge. Cells are 0 or 1.
struct ObservationGrid {
  static constexpr int kChannels = 3;
  static constexpr int kSize = 64;
  static constexpr int kCells = kChannels * kSize * kSize;
  static constexpr double kResolution = 0.5;  // m per cell
  static constexpr int kEgoRow = kSize - 1 - kSize / 4;  // ego sits 25% up from the bottom
  static constexpr int kEgoCol = kSize / 2;

  enum Channel { Road = 0, Obstacles = 1, EgoAndPlan = 2 };

  std::vector<float> cells = std::vector<float>(kCells, 0.0f);

  float at(int channel, int row, int col) const { return cells[index(channel, row, col)]; }
  float& at(int channel, int row, int col) { return cells[index(channel, row, col)]; }
  static std::size_t index(int channel, int row, int col) {
    return (static_cast<std::size_t>(channel) * kSize + static_cast<std::size_t>(row)) * kSize +
           static_cast<std::size_t>(col);
  }
  friend bool operator==(const ObservationGrid&, const ObservationGrid&) = default;
};

ObservationGrid render_observation(const VehicleState& state, const Scenario& scenario,
                                   const trajectory::Trajectory* planned = nullptr,
                                   const VehicleLimits& limits = {});

struct StepEvents {
  bool collision = false;
  bool off_road = false;
  bool reached_s_target = false;
  bool reached_both = false;
};

struct StepOutcome {
  VehicleState state;                  // state at the end of the step
  double traveled = 0.0;               // l: polyline length of visited positions
  StepEvents events;
  ltl::Trace trace_states;             // atoms handed to the rule monitor
  std::vector<VehicleState> visited;   // start state then every sub-step state
  std::vector<ltl::State> visited_atoms;  // atoms of every sub-step state
  bool terminated = false;             // collision, off road or goal
  bool truncated = false;              // step budget exhausted
  int step_index = 0;
};

/// One ego vehicle on one scenario. Value type: copying an environment forks
/// the simulation.
class Environment {
 public:
  Environment(WorldConfig config, ActionMode mode, TraceMode trace_mode);

  ObservationGrid reset(const Scenario& scenario);

  struct StepResult {
    ObservationGrid observation;
    StepOutcome outcome;
  };
  StepResult step(int action);
  /// Same as step() without rendering the next observation.
  StepOutcome advance(int action);

  ObservationGrid observe() const;

  bool done() const { return done_; }
  int steps_taken() const { return steps_; }
  int action_count() const { return irl::world::action_count(mode_); }
  ActionMode mode() const { return mode_; }
  TraceMode trace_mode() const { return trace_mode_; }
  const VehicleState& state() const { return state_; }
  const Scenario& scenario() const { return scenario_; }
  const WorldConfig& config() const { return config_; }
  const std::optional<trajectory::Trajectory>& last_trajectory() const { return last_trajectory_; }
  double elapsed_time() const { return time_; }

 private:
  void substep(Controls controls, StepOutcome& out);

  WorldConfig config_;
  ActionMode mode_;
  TraceMode trace_mode_;
  Scenario scenario_;
  VehicleState state_;
  TrajectoryTracker tracker_;
  std::optional<trajectory::Trajectory> last_trajectory_;
  int steps_ = 0;
  double time_ = 0.0;
  bool done_ = true;
};

/// Ego start pose: standstill at s = 0 on the lane centre.
VehicleState initial_state(const Scenario& scenario);

}  // namespace irl::world
