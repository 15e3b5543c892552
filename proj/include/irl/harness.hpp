#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irl/agent.hpp"
#include "irl/config.hpp"
#include "irl/environment.hpp"
#include "irl/reward.hpp"
#include "irl/rulebook.hpp"
#include "irl/scenario.hpp"

namespace irl::harness {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Wiring {
  world::ActionMode action_mode;
  world::TraceMode trace_mode;
  bool situation_aware;
};

Wiring wiring(Ablation ablation);

/// Environment, rule set and reward switches of one ablation.
struct Setup {
  Ablation ablation;
  world::WorldConfig world;
  world::Environment env;
  rulebook::Rulebook rulebook;
  bool situation_aware;

  agent::NetworkShape network_shape() const;
};

/// Loads config.rulebook_file when set, else the built-in rule set.
Setup apply_ablation(const RunConfig& config);

/// 1 when both goal coordinates were reached, 0.5 for longitudinal only.
double finished_score(const world::StepEvents& final_events);
double finished_score(const world::StepOutcome& final_outcome, const world::Scenario& scenario);

struct EpisodeResult {
  int scenario_id = 0;
  world::ScenarioKind kind = world::ScenarioKind::Normal;
  double arrived_distance = 0.0;  // final s, clamped to [0, route length]
  double finished_score = 0.0;
  int steps = 0;
  double episode_return = 0.0;  // 0 in eval mode
  std::map<std::string, int> violations;  // steps in which each rule failed
  std::optional<std::pair<double, double>> active_span;  // s interval inside the exception window
  bool collision = false;
  bool off_road = false;
  bool truncated = false;
  std::optional<double> mean_loss;
};

/// Chooses an action from the environment before the step and the current
/// observation.
using Policy = std::function<int(const world::Environment&, const world::ObservationGrid&)>;
/// Called after every env step. `reward` is null in eval mode.
using StepHook = std::function<void(const world::Environment&, int action, const world::StepOutcome&,
                                    const reward::RewardBreakdown* reward)>;

/// Rolls `policy` out to termination without reward bookkeeping.
EpisodeResult run_policy_episode(Setup& setup, const world::Scenario& scenario, const Policy& policy,
                                 const StepHook& hook = {});

enum class EpisodeMode { Train, Eval };

/// Train: epsilon-greedy on the run schedule, transitions stored and updates
/// run per the agent schedule; stops early once the agent has taken
/// `total_steps` env steps. Eval: greedy, no learning.
EpisodeResult run_episode(Setup& setup, agent::DqnAgent& agent, const world::Scenario& scenario, EpisodeMode mode,
                          std::uint64_t total_steps, const StepHook& hook = {});

EpisodeResult run_greedy_episode(Setup& setup, const agent::QNetwork<float>& net, const world::Scenario& scenario,
                                 const StepHook& hook = {});

struct EvalSummary {
  std::vector<EpisodeResult> rows;  // ordered by scenario id
  double mean_finished_score = 0.0;
  double std_finished_score = 0.0;
  double mean_arrived_distance = 0.0;
  double std_arrived_distance = 0.0;
};

EvalSummary evaluate(Setup& setup, const agent::QNetwork<float>& net, const std::vector<world::Scenario>& scenarios);
EvalSummary summarize(std::vector<EpisodeResult> rows);

/// Per-scenario rows as CSV and the aggregates as JSON.
void write_eval_rows(const EvalSummary& summary, const std::filesystem::path& csv);
void write_eval_summary(const EvalSummary& summary, const std::filesystem::path& json);

struct TrainOptions {
  std::filesystem::path out_dir;
  bool resume = false;
  std::function<void(const std::string&)> log;  // progress lines, optional
};

struct TrainSummary {
  std::uint64_t steps = 0;
  int episodes = 0;
  std::filesystem::path metrics_csv;
  std::filesystem::path eval_csv;
  std::filesystem::path checkpoint;
};

inline constexpr const char* kMetricsHeader =
    "step,episode,phase,ablation,arrived_distance,finished_score,return,loss,epsilon";

/// Curriculum training. Writes out_dir/metrics.csv, out_dir/eval.csv,
/// out_dir/checkpoint.bin and out_dir/config.ini.
TrainSummary train(const RunConfig& config, const TrainOptions& options);

/// Scenario sets of a run, generated from the benchmark seed.
std::vector<world::Scenario> split_scenarios(const RunConfig& config, const IndexRange& range, world::ScenarioKind kind);

/// Running statistics over a window of episodes, one file per metric.
inline constexpr int kPlotWindow = 50;
struct SeriesPoint {
  std::uint64_t step;
  double mean, std, p5, p95;
};
std::vector<SeriesPoint> running_series(const std::vector<std::pair<std::uint64_t, double>>& values, int window);
/// Reads a metrics CSV and writes <out_dir>/<metric>.csv for arrived_distance,
/// finished_score and return. Returns the written paths.
std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path& metrics_csv,
                                                   const std::filesystem::path& out_dir, int window = kPlotWindow);

/// Greedy rollout dumped per simulation sub-step. With traj_dir set, every
/// planned trajectory goes to traj_dir/step_NNNN.csv.
void write_replay(Setup& setup, const agent::QNetwork<float>& net, const world::Scenario& scenario,
                  const std::filesystem::path& out_csv, const std::optional<std::filesystem::path>& traj_dir = {});

}  // namespace irl::harness
