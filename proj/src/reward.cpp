#include "irl/reward.hpp"

#include <algorithm>

namespace irl::reward {

double finish_reward(const world::StepEvents& events) {
  if (events.reached_both) return kFinishBoth;
  if (events.reached_s_target) return kFinishLongitudinal;
  return 0.0;
}

double speed_term(double speed) { return (speed >= kSpeedBandLow && speed <= kSpeedBandHigh) ? 0.0 : -1.0; }

double ego_reward(const world::StepOutcome& outcome, const world::Scenario& /*scenario*/) {
  return finish_reward(outcome.events) + speed_term(outcome.state.speed) * outcome.traveled;
}

bool step_rulebook_active(const world::StepOutcome& outcome, const world::Scenario& scenario,
                          const world::WorldConfig& config) {
  return std::any_of(outcome.visited.begin(), outcome.visited.end(),
                     [&](const world::VehicleState& s) { return world::rulebook_active(s, scenario, config); });
}

RewardBreakdown total_reward(const world::StepOutcome& outcome, const world::Scenario& scenario,
                             rulebook::Rulebook& rulebook, const world::WorldConfig& config,
                             bool situation_aware) {
  RewardBreakdown out;
  out.rulebook_active = situation_aware && step_rulebook_active(outcome, scenario, config);
  rulebook.set_active(out.rulebook_active);

  const double l = outcome.traveled;
  std::map<std::string, double> weights;
  for (const auto& rule : rulebook.rules()) weights[rule.id] = l;
  weights[rulebook::kCollisionRule] = 1.0;

  const rulebook::RulebookReward rb = rulebook.reward(outcome.trace_states, weights);
  const double finish = finish_reward(outcome.events);
  const double speed = speed_term(outcome.state.speed) * l;

  out.r_ego = finish + speed;
  out.r_rb = rb.total;
  out.r_total = out.r_ego + out.r_rb;
  out.components["r_finish"] = finish;
  out.components["r_speed_l"] = speed;
  for (const auto& [id, c] : rb.per_rule) out.components[id] = c.contribution;
  return out;
}

}  // namespace irl::reward
