#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irl/geometry.hpp"

namespace irl::world {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { Normal, Anomaly };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& text);

/// Static blockage centred on the ego lane, placed in Frenet coordinates.
struct Obstacle {
  double s_center = 0.0;
  double length = 0.0;
  double width = 0.0;
};

struct Goal {
  double s_target = 0.0;
  double d_target = 0.0;
};

struct Scenario {
  int id = 0;
  geometry::ReferencePath path;
  double lane_width = 3.5;
  std::optional<Obstacle> obstacle;
  Goal goal;
  ScenarioKind kind = ScenarioKind::Normal;
  std::uint64_t seed = 0;
};

inline constexpr double kRouteLength = 80.0;
inline constexpr double kLaneWidth = 3.5;
inline constexpr double kGoalMargin = 2.0;
inline constexpr double kPathSpacing = 0.5;
inline constexpr double kMaxCurvature = 1.0 / 100.0;
inline constexpr double kObstacleMinS = 15.0;
inline constexpr double kObstacleMaxS = 60.0;

/// Deterministic in (seed, kind). Normal and anomaly scenarios of one seed
/// share the same route.
Scenario generate_scenario(std::uint64_t seed, ScenarioKind kind, int id = 0);

/// Seed of benchmark entry `index` for a given benchmark seed.
std::uint64_t benchmark_scenario_seed(std::uint64_t benchmark_seed, int index);
Scenario benchmark_scenario(std::uint64_t benchmark_seed, int index, ScenarioKind kind);

/// Throws ScenarioError naming the violated invariant.
void validate_scenario(const Scenario& scenario);

/// Versioned JSON. Doubles are written in shortest round-trip form, so a
/// saved scenario reloads bit-identically.
std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& scenario, const std::filesystem::path& file);
Scenario load_scenario(const std::filesystem::path& file);

/// Loads a single scenario file, or every *.json under a directory (sorted
/// by file name, recursively).
std::vector<Scenario> load_scenarios(const std::filesystem::path& file_or_dir);

/// Writes out_dir/<kind>/NNNN.json for index 0..count-1.
std::vector<std::filesystem::path> write_benchmark(const std::filesystem::path& out_dir, int count,
                                                   std::uint64_t benchmark_seed, ScenarioKind kind);

}  // namespace irl::world
