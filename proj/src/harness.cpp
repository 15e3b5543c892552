#include "irl/harness.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "irl/text.hpp"

namespace irl::harness {

namespace fs = std::filesystem;
using world::ActionMode;
using world::TraceMode;

Wiring wiring(Ablation ablation) {
  switch (ablation) {
    case Ablation::Baseline: return {ActionMode::Control, TraceMode::PerState, false};
    case Ablation::Trajectory: return {ActionMode::Trajectory, TraceMode::PerTrajectory, false};
    case Ablation::Rulebook: return {ActionMode::Control, TraceMode::PerState, true};
    case Ablation::Combination: return {ActionMode::Trajectory, TraceMode::PerTrajectory, true};
  }
  throw HarnessError("unknown ablation");
}

agent::NetworkShape Setup::network_shape() const {
  agent::NetworkShape shape;
  shape.in_channels = world::ObservationGrid::kChannels;
  shape.in_size = world::ObservationGrid::kSize;
  shape.actions = env.action_count();
  return shape;
}

Setup apply_ablation(const RunConfig& config) {
  const Wiring w = wiring(config.ablation);
  rulebook::Rulebook rb =
      config.rulebook_file.empty() ? rulebook::default_rulebook() : rulebook::load_rulebook(config.rulebook_file);
  rb.set_active(false);
  return Setup{config.ablation, config.world, world::Environment(config.world, w.action_mode, w.trace_mode),
               std::move(rb), w.situation_aware};
}

double finished_score(const world::StepEvents& e) {
  if (e.reached_both) return 1.0;
  if (e.reached_s_target) return 0.5;
  return 0.0;
}

double finished_score(const world::StepOutcome& final_outcome, const world::Scenario& /*scenario*/) {
  return finished_score(final_outcome.events);
}

namespace {

struct EpisodeBookkeeping {
  EpisodeResult result;
  double loss_sum = 0.0;
  int loss_count = 0;

  EpisodeBookkeeping(const Setup& setup, const world::Scenario& sc) {
    result.scenario_id = sc.id;
    result.kind = sc.kind;
    for (const auto& rule : setup.rulebook.rules()) result.violations[rule.id] = 0;
  }

  void record(const Setup& setup, const world::Scenario& sc, const world::StepOutcome& out) {
    ++result.steps;
    for (const auto& rule : setup.rulebook.rules()) {
      if (ltl::rule_penalty(rule.formula, out.visited_atoms) < 0.0) ++result.violations[rule.id];
    }
    for (const auto& st : out.visited) {
      if (!world::rulebook_active(st, sc, setup.world)) continue;
      const double s = st.frenet.s;
      if (!result.active_span) {
        result.active_span = std::make_pair(s, s);
      } else {
        result.active_span->first = std::min(result.active_span->first, s);
        result.active_span->second = std::max(result.active_span->second, s);
      }
    }
  }

  void finish(const world::StepOutcome& last) {
    result.arrived_distance = std::clamp(last.state.frenet.s, 0.0, world::kRouteLength);
    result.finished_score = finished_score(last.events);
    result.collision = last.events.collision;
    result.off_road = last.events.off_road;
    result.truncated = !last.terminated;
    if (loss_count > 0) result.mean_loss = loss_sum / loss_count;
  }
};

}  // namespace

EpisodeResult run_policy_episode(Setup& setup, const world::Scenario& scenario, const Policy& policy,
                                 const StepHook& hook) {
  EpisodeBookkeeping book(setup, scenario);
  world::ObservationGrid obs = setup.env.reset(scenario);
  world::StepOutcome last;
  while (!setup.env.done()) {
    const int action = policy(setup.env, obs);
    auto [next, outcome] = setup.env.step(action);
    book.record(setup, scenario, outcome);
    if (hook) hook(setup.env, action, outcome, nullptr);
    obs = std::move(next);
    last = std::move(outcome);
  }
  book.finish(last);
  return book.result;
}

EpisodeResult run_greedy_episode(Setup& setup, const agent::QNetwork<float>& net, const world::Scenario& scenario,
                                 const StepHook& hook) {
  if (net.shape().actions != setup.env.action_count() || net.shape().input_dim() != world::ObservationGrid::kCells) {
    throw HarnessError("network shape does not match the " + to_string(setup.ablation) + " ablation");
  }
  agent::QNetwork<float>::Matrix input(net.shape().input_dim(), 1);
  const Policy greedy = [&](const world::Environment&, const world::ObservationGrid& obs) {
    std::copy(obs.cells.begin(), obs.cells.end(), input.data());
    return agent::argmax_action<float>(net.forward(input));
  };
  return run_policy_episode(setup, scenario, greedy, hook);
}

EpisodeResult run_episode(Setup& setup, agent::DqnAgent& agent, const world::Scenario& scenario, EpisodeMode mode,
                          std::uint64_t total_steps, const StepHook& hook) {
  if (mode == EpisodeMode::Eval) return run_greedy_episode(setup, agent.online(), scenario, hook);
  if (agent.online().shape().actions != setup.env.action_count()) {
    throw HarnessError("agent action count does not match the " + to_string(setup.ablation) + " ablation");
  }

  EpisodeBookkeeping book(setup, scenario);
  world::ObservationGrid obs = setup.env.reset(scenario);
  world::StepOutcome last;
  while (!setup.env.done() && agent.env_steps() < total_steps) {
    const double eps = agent::epsilon_at(agent.config(), agent.env_steps(), total_steps);
    const int action = agent.act(obs, eps);
    auto [next, outcome] = setup.env.step(action);
    const reward::RewardBreakdown r =
        reward::total_reward(outcome, scenario, setup.rulebook, setup.world, setup.situation_aware);
    book.result.episode_return += r.r_total;
    book.record(setup, scenario, outcome);
    agent.remember({agent::PackedObservation(obs), action, r.r_total, agent::PackedObservation(next),
                    outcome.terminated});
    if (const auto loss = agent.on_env_step()) {
      book.loss_sum += *loss;
      ++book.loss_count;
    }
    if (hook) hook(setup.env, action, outcome, &r);
    obs = std::move(next);
    last = std::move(outcome);
  }
  book.finish(last);
  return book.result;
}

EvalSummary summarize(std::vector<EpisodeResult> rows) {
  if (rows.empty()) throw HarnessError("cannot summarize an empty scenario set");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const EpisodeResult& a, const EpisodeResult& b) { return a.scenario_id < b.scenario_id; });
  EvalSummary s;
  const auto n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    s.mean_finished_score += r.finished_score;
    s.mean_arrived_distance += r.arrived_distance;
  }
  s.mean_finished_score /= n;
  s.mean_arrived_distance /= n;
  for (const auto& r : rows) {
    s.std_finished_score += (r.finished_score - s.mean_finished_score) * (r.finished_score - s.mean_finished_score);
    s.std_arrived_distance +=
        (r.arrived_distance - s.mean_arrived_distance) * (r.arrived_distance - s.mean_arrived_distance);
  }
  s.std_finished_score = std::sqrt(s.std_finished_score / n);
  s.std_arrived_distance = std::sqrt(s.std_arrived_distance / n);
  s.rows = std::move(rows);
  return s;
}

EvalSummary evaluate(Setup& setup, const agent::QNetwork<float>& net, const std::vector<world::Scenario>& scenarios) {
  if (scenarios.empty()) throw HarnessError("evaluation scenario set is empty");
  std::vector<EpisodeResult> rows;
  rows.reserve(scenarios.size());
  for (const auto& sc : scenarios) rows.push_back(run_greedy_episode(setup, net, sc));
  return summarize(std::move(rows));
}

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::out | mode);
  if (!os) throw HarnessError("cannot write " + path.string());
  return os;
}

std::string span_text(const std::optional<std::pair<double, double>>& span, bool lower) {
  if (!span) return {};
  return format_double(lower ? span->first : span->second);
}

}  // namespace

void write_eval_rows(const EvalSummary& summary, const fs::path& csv) {
  auto os = open_out(csv);
  std::vector<std::string> rules;
  if (!summary.rows.empty()) {
    for (const auto& [id, n] : summary.rows.front().violations) rules.push_back(id);
  }
  os << "scenario_id,kind,arrived_distance,finished_score,steps,collision,off_road,truncated,active_s_begin,"
        "active_s_end";
  for (const auto& id : rules) os << ",violations_" << id;
  os << '\n';
  for (const auto& r : summary.rows) {
    os << r.scenario_id << ',' << world::to_string(r.kind) << ',' << format_double(r.arrived_distance) << ','
       << format_double(r.finished_score) << ',' << r.steps << ',' << int(r.collision) << ',' << int(r.off_road) << ','
       << int(r.truncated) << ',' << span_text(r.active_span, true) << ',' << span_text(r.active_span, false);
    for (const auto& id : rules) {
      const auto it = r.violations.find(id);
      os << ',' << (it == r.violations.end() ? 0 : it->second);
    }
    os << '\n';
  }
}

void write_eval_summary(const EvalSummary& summary, const fs::path& json) {
  nlohmann::ordered_json j;
  j["episodes"] = summary.rows.size();
  j["mean_finished_score"] = summary.mean_finished_score;
  j["std_finished_score"] = summary.std_finished_score;
  j["mean_arrived_distance"] = summary.mean_arrived_distance;
  j["std_arrived_distance"] = summary.std_arrived_distance;
  auto os = open_out(json);
  os << j.dump(2) << '\n';
}

std::vector<world::Scenario> split_scenarios(const RunConfig& config, const IndexRange& range,
                                             world::ScenarioKind kind) {
  std::vector<world::Scenario> out;
  out.reserve(static_cast<std::size_t>(std::max(0, range.size())));
  for (int i = range.begin; i < range.end; ++i) out.push_back(world::benchmark_scenario(config.benchmark_seed, i, kind));
  return out;
}

namespace {

constexpr const char* kEvalHeader =
    "step,episodes,mean_finished_score,std_finished_score,mean_arrived_distance,std_arrived_distance";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Keeps the header and the rows whose first column is at most `step`.
int truncate_log(const fs::path& path, const std::string& header, std::uint64_t step) {
  std::vector<std::string> kept;
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line != header) throw HarnessError(path.string() + " has an unexpected header");
        continue;
      }
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (std::stoull(cells.at(0)) <= step) kept.push_back(line);
    }
  }
  auto os = open_out(path);
  os << header << '\n';
  for (const auto& l : kept) os << l << '\n';
  return static_cast<int>(kept.size());
}

}  // namespace

TrainSummary train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
#if defined(__GLIBC__)
  // Batch matrices are a few MB each. Above the default threshold glibc maps
  // and unmaps them on every update, which costs a quarter of the run time.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  Setup setup = apply_ablation(config);
  agent::DqnAgent learner(config.agent, setup.network_shape(), config.master_seed);

  TrainSummary summary;
  summary.metrics_csv = options.out_dir / "metrics.csv";
  summary.eval_csv = options.out_dir / "eval.csv";
  summary.checkpoint = options.out_dir / "checkpoint.bin";
  fs::create_directories(options.out_dir);
  open_out(options.out_dir / "config.ini") << to_ini(config);

  const std::uint32_t tag = ablation_code(config.ablation);
  int episode = 0;
  if (options.resume && fs::exists(summary.checkpoint)) {
    agent::CheckpointHeader h;
    const auto net = agent::load_checkpoint(summary.checkpoint, &h);
    if (h.tag != tag) throw HarnessError("checkpoint was written by a different ablation");
    learner.load_parameters(net, h.steps);
    episode = truncate_log(summary.metrics_csv, kMetricsHeader, h.steps);
    truncate_log(summary.eval_csv, kEvalHeader, h.steps);
    if (options.log) options.log("resumed at step " + std::to_string(h.steps));
  } else {
    open_out(summary.metrics_csv) << kMetricsHeader << '\n';
    open_out(summary.eval_csv) << kEvalHeader << '\n';
  }
  std::ofstream metrics = open_out(summary.metrics_csv, std::ios::app);
  std::ofstream eval_log = open_out(summary.eval_csv, std::ios::app);

  Rng curriculum(derive_seed(config.master_seed, "curriculum", learner.env_steps()));
  const std::vector<world::Scenario> val =
      split_scenarios(config, {config.val_split.begin, config.val_split.begin + config.eval_episodes},
                      world::ScenarioKind::Anomaly);
  const std::uint64_t never = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t next_eval =
      config.eval_every == 0 ? never : (learner.env_steps() / config.eval_every + 1) * config.eval_every;

  const std::string ablation = to_string(config.ablation);
  while (learner.env_steps() < config.total_steps) {
    const bool normal = learner.env_steps() < config.curriculum_switch_step;
    const int index =
        config.train_split.begin +
        static_cast<int>(curriculum.uniform_index(static_cast<std::uint64_t>(config.train_split.size())));
    const world::Scenario sc = world::benchmark_scenario(
        config.benchmark_seed, index, normal ? world::ScenarioKind::Normal : world::ScenarioKind::Anomaly);
    const EpisodeResult r = run_episode(setup, learner, sc, EpisodeMode::Train, config.total_steps);
    const double eps = agent::epsilon_at(config.agent, learner.env_steps(), config.total_steps);
    metrics << learner.env_steps() << ',' << episode << ',' << (normal ? "normal" : "anomaly") << ',' << ablation
            << ',' << format_double(r.arrived_distance) << ',' << format_double(r.finished_score) << ','
            << format_double(r.episode_return) << ',' << (r.mean_loss ? format_double(*r.mean_loss) : "") << ','
            << format_double(eps) << '\n';
    metrics.flush();
    ++episode;

    if (learner.env_steps() >= next_eval) {
      const EvalSummary s = evaluate(setup, learner.online(), val);
      eval_log << learner.env_steps() << ',' << s.rows.size() << ',' << format_double(s.mean_finished_score) << ','
               << format_double(s.std_finished_score) << ',' << format_double(s.mean_arrived_distance) << ','
               << format_double(s.std_arrived_distance) << '\n';
      eval_log.flush();
      agent::save_checkpoint(summary.checkpoint, learner.online(), tag, learner.env_steps());
      if (options.log) {
        options.log("step " + std::to_string(learner.env_steps()) + " val finished " +
                    format_double(s.mean_finished_score) + " arrived " + format_double(s.mean_arrived_distance));
      }
      while (next_eval <= learner.env_steps()) next_eval += config.eval_every;
    }
  }
  agent::save_checkpoint(summary.checkpoint, learner.online(), tag, learner.env_steps());
  summary.steps = learner.env_steps();
  summary.episodes = episode;
  return summary;
}

std::vector<SeriesPoint> running_series(const std::vector<std::pair<std::uint64_t, double>>& values, int window) {
  if (window < 1) throw HarnessError("window must be at least 1");
  std::vector<SeriesPoint> out;
  out.reserve(values.size());
  std::vector<double> buf;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - static_cast<std::size_t>(window) : 0;
    buf.clear();
    for (std::size_t k = lo; k <= i; ++k) buf.push_back(values[k].second);
    const double n = static_cast<double>(buf.size());
    const double mean = std::accumulate(buf.begin(), buf.end(), 0.0) / n;
    double var = 0.0;
    for (double v : buf) var += (v - mean) * (v - mean);
    std::sort(buf.begin(), buf.end());
    // Linear interpolation between closest ranks.
    auto quantile = [&](double q) {
      const double pos = q * (n - 1.0);
      const auto k = static_cast<std::size_t>(std::floor(pos));
      const double f = pos - static_cast<double>(k);
      return k + 1 < buf.size() ? buf[k] + f * (buf[k + 1] - buf[k]) : buf[k];
    };
    out.push_back({values[i].first, mean, std::sqrt(var / n), quantile(0.05), quantile(0.95)});
  }
  return out;
}

std::vector<fs::path> write_plot_data(const fs::path& metrics_csv, const fs::path& out_dir, int window) {
  std::ifstream in(metrics_csv);
  if (!in) throw HarnessError("cannot read metrics file " + metrics_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw HarnessError(metrics_csv.string() + " is empty");
  const auto header = split_csv(line);
  const std::vector<std::string> metrics{"arrived_distance", "finished_score", "return"};
  std::vector<std::size_t> cols;
  for (const auto& m : metrics) {
    const auto it = std::find(header.begin(), header.end(), m);
    if (it == header.end()) throw HarnessError(metrics_csv.string() + " has no column " + m);
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::vector<std::pair<std::uint64_t, double>>> values(metrics.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw HarnessError(metrics_csv.string() + ":" + std::to_string(row) + ": expected " +
                         std::to_string(header.size()) + " columns");
    }
    try {
      const std::uint64_t step = std::stoull(cells[0]);
      for (std::size_t m = 0; m < metrics.size(); ++m) values[m].emplace_back(step, std::stod(cells[cols[m]]));
    } catch (const std::logic_error&) {
      throw HarnessError(metrics_csv.string() + ":" + std::to_string(row) + ": malformed number");
    }
  }
  std::vector<fs::path> written;
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const fs::path path = out_dir / (metrics[m] + ".csv");
    auto os = open_out(path);
    os << "step,mean,std,p5,p95\n";
    for (const auto& p : running_series(values[m], window)) {
      os << p.step << ',' << format_double(p.mean) << ',' << format_double(p.std) << ',' << format_double(p.p5) << ','
         << format_double(p.p95) << '\n';
    }
    written.push_back(path);
  }
  return written;
}

void write_replay(Setup& setup, const agent::QNetwork<float>& net, const world::Scenario& scenario,
                  const fs::path& out_csv, const std::optional<fs::path>& traj_dir) {
  auto os = open_out(out_csv);
  std::vector<std::string> terms{"r_finish", "r_speed_l"};
  for (const auto& rule : setup.rulebook.rules()) terms.push_back(rule.id);
  os << "step,substep,time,x,y,heading,s,d,speed,action,no_collision,in_lane,no_out_road,rulebook_active";
  for (const auto& t : terms) os << ',' << t;
  os << ",r_total\n";

  // Reward terms go on the last sub-step row of each step, blank elsewhere.
  const double dt = setup.world.dt;
  auto row = [&](int step, int sub, double t, const world::VehicleState& st, const std::string& action,
                 const ltl::State& atoms, const reward::RewardBreakdown* r) {
    auto flag = [&](const char* name) {
      const auto it = atoms.find(name);
      return it != atoms.end() && it->second ? 1 : 0;
    };
    os << step << ',' << sub << ',' << format_double(t) << ',' << format_double(st.position.x) << ','
       << format_double(st.position.y) << ',' << format_double(st.heading) << ',' << format_double(st.frenet.s) << ','
       << format_double(st.frenet.d) << ',' << format_double(st.speed) << ',' << action << ','
       << flag(world::kNoCollision) << ',' << flag(world::kInLane) << ',' << flag(world::kNoOutRoad) << ','
       << int(setup.situation_aware && world::rulebook_active(st, scenario, setup.world));
    for (const auto& term : terms) os << ',' << (r ? format_double(r->components.at(term)) : "");
    os << ',' << (r ? format_double(r->r_total) : "") << '\n';
  };
  const world::VehicleState start = world::initial_state(scenario);
  row(0, 0, 0.0, start, "", world::eval_atoms(start, scenario, setup.world.limits), nullptr);
  int substeps = 0;
  const StepHook hook = [&](const world::Environment& env, int action, const world::StepOutcome& out,
                            const reward::RewardBreakdown*) {
    const reward::RewardBreakdown r =
        reward::total_reward(out, scenario, setup.rulebook, setup.world, setup.situation_aware);
    for (std::size_t k = 1; k < out.visited.size(); ++k) {
      ++substeps;
      row(out.step_index + 1, static_cast<int>(k), substeps * dt, out.visited[k], std::to_string(action),
          out.visited_atoms[k - 1], k + 1 == out.visited.size() ? &r : nullptr);
    }
    if (traj_dir && env.last_trajectory() && env.mode() == ActionMode::Trajectory) {
      std::ostringstream name;
      name << "step_" << std::setfill('0') << std::setw(4) << out.step_index + 1 << ".csv";
      auto ts = open_out(*traj_dir / name.str());
      ts << "time,s,d,x,y,speed\n";
      for (const auto& p : env.last_trajectory()->samples) {
        ts << format_double(p.time) << ',' << format_double(p.frenet.s) << ',' << format_double(p.frenet.d) << ','
           << format_double(p.position.x) << ',' << format_double(p.position.y) << ',' << format_double(p.speed)
           << '\n';
      }
    }
  };
  run_greedy_episode(setup, net, scenario, hook);
}

}  // namespace irl::harness
