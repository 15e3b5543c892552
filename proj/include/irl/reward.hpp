#pragma once

#include <map>
#include <string>

#include "irl/environment.hpp"
#include "irl/rulebook.hpp"

namespace irl::reward {

inline constexpr double kFinishBoth = 60.0;
inline constexpr double kFinishLongitudinal = 10.0;
inline constexpr double kSpeedBandLow = 10.0 / 3.6;   // m/s, inclusive
inline constexpr double kSpeedBandHigh = 50.0 / 3.6;  // m/s, inclusive

struct RewardBreakdown {
  double r_ego = 0.0;
  double r_rb = 0.0;
  double r_total = 0.0;
  bool rulebook_active = false;
  /// "r_finish", "r_speed_l", then one entry per rule id.
  std::map<std::string, double> components;
};

double finish_reward(const world::StepEvents& events);
/// -1 outside the inclusive 10-50 km/h band, else 0.
double speed_term(double speed);

/// r_finish + r_speed * l, with the speed taken at the end of the step.
double ego_reward(const world::StepOutcome& outcome, const world::Scenario& scenario);

/// Whether situation awareness switches the hierarchy on for this step: any
/// state visited during the step lies in the activation window.
bool step_rulebook_active(const world::StepOutcome& outcome, const world::Scenario& scenario,
                          const world::WorldConfig& config);

/// r_ego + r_RB. With situation_aware false the rulebook stays inactive
/// (every coefficient 1). Collision carries weight 1, lane and road rules
/// carry the traveled length l.
RewardBreakdown total_reward(const world::StepOutcome& outcome, const world::Scenario& scenario,
                             rulebook::Rulebook& rulebook, const world::WorldConfig& config = {},
                             bool situation_aware = true);

}  // namespace irl::reward
