#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "irl/harness.hpp"
#include "support/oracles.hpp"

using namespace irl::harness;
namespace fs = std::filesystem;
using irl::world::ScenarioKind;

namespace {

RunConfig config_for(Ablation a) {
  RunConfig c;
  c.ablation = a;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "irl_harness_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig smoke_config() {
  RunConfig c;
  c.total_steps = 10;
  c.curriculum_switch_step = 5;
  c.eval_every = 0;
  c.agent.learning_starts = 4;
  c.agent.batch_size = 4;
  return c;
}

}  // namespace

TEST_CASE("finished score cases") {
  irl::world::StepEvents e;
  e.collision = true;
  CHECK(finished_score(e) == 0.0);
  e = {};
  e.reached_s_target = true;
  CHECK(finished_score(e) == 0.5);
  e.reached_both = true;
  CHECK(finished_score(e) == 1.0);
}

TEST_CASE("ablation wiring") {
  Setup base = apply_ablation(config_for(Ablation::Baseline));
  CHECK(base.env.action_count() == 9);
  CHECK_FALSE(base.situation_aware);
  CHECK(base.network_shape().actions == 9);
  Setup traj = apply_ablation(config_for(Ablation::Trajectory));
  CHECK(traj.env.action_count() == 3);
  CHECK_FALSE(traj.situation_aware);
  Setup rb = apply_ablation(config_for(Ablation::Rulebook));
  CHECK(rb.env.trace_mode() == irl::world::TraceMode::PerState);
  CHECK(rb.situation_aware);
  Setup comb = apply_ablation(config_for(Ablation::Combination));
  CHECK(comb.env.mode() == irl::world::ActionMode::Trajectory);
  CHECK(comb.env.trace_mode() == irl::world::TraceMode::PerTrajectory);
  CHECK(comb.situation_aware);
}

TEST_CASE("trajectory ablation never damps the rules") {
  Setup setup = apply_ablation(config_for(Ablation::Trajectory));
  const auto sc = irl::world::benchmark_scenario(42, 0, ScenarioKind::Anomaly);
  bool visited_window = false;
  run_policy_episode(setup, sc, irl::testing::avoid_and_return,
                     [&](const irl::world::Environment&, int, const irl::world::StepOutcome& out,
                         const irl::reward::RewardBreakdown*) {
                       const auto r = irl::reward::total_reward(out, sc, setup.rulebook, setup.world,
                                                                setup.situation_aware);
                       visited_window |= irl::reward::step_rulebook_active(out, sc, setup.world);
                       for (const auto& rule : setup.rulebook.rules())
                         CHECK(setup.rulebook.cumulative_coefficient(rule.id) == 1.0);
                       CHECK_FALSE(r.rulebook_active);
                     });
  CHECK(visited_window);
}

TEST_CASE("rulebook ablation checks single states") {
  Setup setup = apply_ablation(config_for(Ablation::Rulebook));
  const auto sc = irl::world::benchmark_scenario(42, 1, ScenarioKind::Anomaly);
  int k = 0;
  run_policy_episode(
      setup, sc, [&](const irl::world::Environment&, const irl::world::ObservationGrid&) { return (k++ % 2) ? 7 : 4; },
      [&](const irl::world::Environment&, int, const irl::world::StepOutcome& out, const irl::reward::RewardBreakdown*) {
        REQUIRE(out.trace_states.size() == 1);
        const auto atoms = irl::world::eval_atoms(out.state, sc, setup.world.limits);
        for (const auto& rule : setup.rulebook.rules()) {
          const bool g = irl::ltl::rule_penalty(rule.formula, out.trace_states) == 0.0;
          CHECK(g == irl::ltl::eval_formula(rule.formula.operand(), {atoms}, 0));
        }
      });
}

TEST_CASE("scripted rollouts on an anomaly scenario") {
  Setup setup = apply_ablation(config_for(Ablation::Combination));
  const auto sc = irl::world::benchmark_scenario(42, 0, ScenarioKind::Anomaly);
  const auto stuck = run_policy_episode(setup, sc, irl::testing::keep_lane);
  CHECK(stuck.finished_score == 0.0);
  const double edge = sc.obstacle->s_center - 0.5 * sc.obstacle->length - 0.5 * setup.world.limits.length;
  CHECK(std::abs(stuck.arrived_distance - edge) < 1.0);

  const auto solved = run_policy_episode(setup, sc, irl::testing::avoid_and_return);
  CHECK(solved.finished_score == 1.0);
  CHECK(solved.arrived_distance >= sc.goal.s_target);
  CHECK(solved.active_span.has_value());
  CHECK(solved.violations.at("psi1") == 0);
  CHECK(solved.violations.at("psi2") > 0);

  const auto normal = irl::world::benchmark_scenario(42, 0, ScenarioKind::Normal);
  const auto easy = run_policy_episode(setup, normal, irl::testing::keep_lane);
  CHECK(easy.finished_score == 1.0);
  CHECK(easy.arrived_distance >= 78.0);
  CHECK_FALSE(easy.active_span.has_value());
}

TEST_CASE("evaluation is deterministic and rejects empty sets") {
  Setup setup = apply_ablation(config_for(Ablation::Combination));
  irl::agent::QNetwork<float> net(setup.network_shape());
  net.initialize(5);
  RunConfig c = config_for(Ablation::Combination);
  const auto scenarios = split_scenarios(c, {900, 905}, ScenarioKind::Anomaly);
  CHECK(scenarios.size() == 5);
  CHECK(scenarios.front().id == 900);
  const auto a = evaluate(setup, net, scenarios);
  const auto b = evaluate(setup, net, scenarios);
  const auto dir = scratch("eval");
  write_eval_rows(a, dir / "a.csv");
  write_eval_rows(b, dir / "b.csv");
  write_eval_summary(a, dir / "a.json");
  write_eval_summary(b, dir / "b.json");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  for (const auto& r : a.rows) {
    CHECK(r.arrived_distance >= 0.0);
    CHECK(r.arrived_distance <= 80.0);
    if (r.finished_score == 1.0) CHECK(r.arrived_distance >= scenarios.front().goal.s_target - 0.5);
  }
  CHECK_THROWS_AS(evaluate(setup, net, {}), HarnessError);
  Setup base = apply_ablation(config_for(Ablation::Baseline));
  CHECK_THROWS_AS(evaluate(base, net, scenarios), HarnessError);
}

TEST_CASE("training smoke run and determinism") {
  const RunConfig c = smoke_config();
  const auto d1 = scratch("smoke1");
  const auto d2 = scratch("smoke2");
  const auto s1 = train(c, {d1, false, {}});
  const auto s2 = train(c, {d2, false, {}});
  CHECK(s1.steps == 10);
  CHECK(fs::exists(s1.checkpoint));
  const std::string log = slurp(s1.metrics_csv);
  CHECK(log.rfind(kMetricsHeader, 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') >= 2);
  CHECK(log == slurp(s2.metrics_csv));
  CHECK(slurp(s1.checkpoint) == slurp(s2.checkpoint));

  // Logged steps strictly increase.
  std::istringstream is(log);
  std::string line;
  std::getline(is, line);
  long prev = -1;
  while (std::getline(is, line)) {
    const long step = std::stol(line.substr(0, line.find(',')));
    CHECK(step > prev);
    prev = step;
  }
}

TEST_CASE("running series statistics") {
  std::vector<std::pair<std::uint64_t, double>> v;
  for (int i = 1; i <= 5; ++i) v.emplace_back(static_cast<std::uint64_t>(i * 10), static_cast<double>(i));
  const auto s = running_series(v, 3);
  REQUIRE(s.size() == 5);
  CHECK(s[0].mean == 1.0);
  CHECK(s[0].std == 0.0);
  CHECK(s[4].step == 50);
  CHECK(s[4].mean == doctest::Approx(4.0));
  CHECK(s[4].std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s[4].p5 == doctest::Approx(3.1));
  CHECK(s[4].p95 == doctest::Approx(4.9));
}
