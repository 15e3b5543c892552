#include "irl/cli.hpp"

#include <ostream>

#include <CLI11.hpp>

#include "irl/harness.hpp"
#include "irl/text.hpp"

namespace irl::cli {

namespace fs = std::filesystem;

Command parse_args(int argc, const char* const* argv) {
  CLI::App app{"Rule-exception driving: scenarios, training, evaluation", "irl"};
  app.require_subcommand(0, 1);
  app.allow_extras(false);

  GenScenarios gen;
  std::string kind = "anomaly";
  auto* gen_cmd = app.add_subcommand("gen-scenarios", "Write a deterministic scenario benchmark");
  gen_cmd->add_option("--count", gen.count, "Number of scenarios")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.seed, "Benchmark seed");
  gen_cmd->add_option("--kind", kind, "normal or anomaly")->check(CLI::IsMember({"normal", "anomaly"}));
  gen_cmd->add_option("--out", gen.out_dir, "Output directory (files go to <out>/<kind>/NNNN.json)")->required();

  Train train;
  auto* train_cmd = app.add_subcommand("train", "Curriculum training run");
  train_cmd->add_option("--config", train.config, "Run config (INI)")->required();
  train_cmd->add_option("--out", train.out_dir, "Run directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/checkpoint.bin");

  Eval eval;
  std::string eval_config;
  auto* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--scenarios", eval.scenarios, "Scenario file or directory")->required();
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->required();
  eval_cmd->add_option("--config", eval_config, "Run config for world constants");

  Replay replay;
  std::string replay_config, traj_dir;
  auto* replay_cmd = app.add_subcommand("replay", "Dump one greedy rollout per sub-step");
  replay_cmd->add_option("--checkpoint", replay.checkpoint, "Checkpoint file")->required();
  replay_cmd->add_option("--scenario", replay.scenario, "Scenario file")->required();
  replay_cmd->add_option("--out", replay.out_csv, "Output CSV")->required();
  replay_cmd->add_option("--trajectories", traj_dir, "Directory for planned trajectories");
  replay_cmd->add_option("--config", replay_config, "Run config for world constants");

  PlotData plot;
  auto* plot_cmd = app.add_subcommand("plot-data", "Running statistics of a metrics log");
  plot_cmd->add_option("--metrics", plot.metrics, "metrics.csv of a run")->required();
  plot_cmd->add_option("--out", plot.out_dir, "Output directory")->required();
  plot_cmd->add_option("--window", plot.window, "Episodes per window")->check(CLI::PositiveNumber);

  ValidateConfig validate;
  auto* validate_cmd = app.add_subcommand("validate-config", "Check a config and print it resolved");
  validate_cmd->add_option("config", validate.config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    for (const CLI::App* sub : app.get_subcommands()) return Help{sub->help()};
    return Help{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    return Help{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (app.get_subcommands().empty()) throw UsageError("a command is required (see --help)");
  if (gen_cmd->parsed()) {
    gen.kind = world::scenario_kind_from_string(kind);
    return gen;
  }
  if (train_cmd->parsed()) return train;
  if (eval_cmd->parsed()) {
    if (!eval_config.empty()) eval.config = eval_config;
    return eval;
  }
  if (replay_cmd->parsed()) {
    if (!replay_config.empty()) replay.config = replay_config;
    if (!traj_dir.empty()) replay.trajectory_dir = traj_dir;
    return replay;
  }
  if (plot_cmd->parsed()) return plot;
  return validate;
}

namespace {

harness::Ablation ablation_from_tag(std::uint32_t tag) {
  for (auto a : {harness::Ablation::Baseline, harness::Ablation::Trajectory, harness::Ablation::Rulebook,
                 harness::Ablation::Combination}) {
    if (harness::ablation_code(a) == tag) return a;
  }
  throw harness::HarnessError("checkpoint carries unknown ablation tag " + std::to_string(tag));
}

// Network plus the run config it belongs to. An explicit config must name
// the checkpoint's ablation.
std::pair<agent::QNetwork<float>, harness::RunConfig> load_policy(const fs::path& checkpoint,
                                                                   const std::optional<fs::path>& config_path) {
  agent::CheckpointHeader header;
  auto net = agent::load_checkpoint(checkpoint, &header);
  const harness::Ablation ablation = ablation_from_tag(header.tag);
  harness::RunConfig config;
  if (config_path) {
    config = harness::load_config(*config_path);
    if (config.ablation != ablation) {
      throw harness::HarnessError("checkpoint was trained as " + harness::to_string(ablation) + " but config says " +
                                  harness::to_string(config.ablation));
    }
  }
  config.ablation = ablation;
  return {std::move(net), config};
}

struct Executor {
  std::ostream& out;

  void operator()(const Help& h) const { out << h.text; }

  void operator()(const GenScenarios& g) const {
    const auto files = world::write_benchmark(g.out_dir, g.count, g.seed, g.kind);
    out << "wrote " << files.size() << ' ' << world::to_string(g.kind) << " scenarios to "
        << (g.out_dir / world::to_string(g.kind)).string() << '\n';
  }

  void operator()(const Train& t) const {
    const harness::RunConfig config = harness::load_config(t.config);
    harness::TrainOptions options;
    options.out_dir = t.out_dir;
    options.resume = t.resume;
    options.log = [this](const std::string& line) { out << line << '\n' << std::flush; };
    const auto summary = harness::train(config, options);
    out << "trained " << summary.steps << " steps over " << summary.episodes << " episodes; metrics in "
        << summary.metrics_csv.string() << '\n';
  }

  void operator()(const Eval& e) const {
    auto [net, config] = load_policy(e.checkpoint, e.config);
    const auto scenarios = world::load_scenarios(e.scenarios);
    harness::Setup setup = harness::apply_ablation(config);
    const auto summary = harness::evaluate(setup, net, scenarios);
    harness::write_eval_rows(summary, e.out_dir / "rows.csv");
    harness::write_eval_summary(summary, e.out_dir / "summary.json");
    out << "episodes " << summary.rows.size() << " finished_score " << format_double(summary.mean_finished_score)
        << " arrived_distance " << format_double(summary.mean_arrived_distance) << '\n';
  }

  void operator()(const Replay& r) const {
    auto [net, config] = load_policy(r.checkpoint, r.config);
    const world::Scenario scenario = world::load_scenario(r.scenario);
    harness::Setup setup = harness::apply_ablation(config);
    harness::write_replay(setup, net, scenario, r.out_csv, r.trajectory_dir);
    out << "wrote " << r.out_csv.string() << '\n';
  }

  void operator()(const PlotData& p) const {
    for (const auto& path : harness::write_plot_data(p.metrics, p.out_dir, p.window)) out << path.string() << '\n';
  }

  void operator()(const ValidateConfig& v) const {
    const harness::RunConfig config = harness::load_config(v.config);
    harness::apply_ablation(config);  // loads and checks the rulebook file
    out << harness::to_ini(config);
  }
};

}  // namespace

void execute(const Command& command, std::ostream& out) { std::visit(Executor{out}, command); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Command command;
  try {
    command = parse_args(argc, argv);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nrun 'irl --help' for usage\n";
    return kExitUsage;
  }
  try {
    execute(command, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace irl::cli
