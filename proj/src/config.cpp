#include "irl/config.hpp"

#include "irl/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace irl::harness {

namespace pt = boost::property_tree;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Baseline: return "baseline";
    case Ablation::Trajectory: return "trajectory";
    case Ablation::Rulebook: return "rulebook";
    case Ablation::Combination: return "combination";
  }
  return "combination";
}

Ablation ablation_from_string(const std::string& text) {
  if (text == "baseline") return Ablation::Baseline;
  if (text == "trajectory") return Ablation::Trajectory;
  if (text == "rulebook") return Ablation::Rulebook;
  if (text == "combination") return Ablation::Combination;
  throw ConfigError("unknown ablation '" + text + "' (expected baseline, trajectory, rulebook or combination)");
}

std::uint32_t ablation_code(Ablation a) { return static_cast<std::uint32_t>(a) + 1; }

namespace {

template <typename T>
T parse_number(const std::string& text, const std::string& field) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc{} || r.ptr != last) throw ConfigError(field + ": cannot parse '" + text + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError(field + ": value must be finite");
  }
  return v;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  std::string name() const { return section + "." + key; }
};

template <typename T, typename Access>
Field number(std::string section, std::string key, Access access) {
  Field f{std::move(section), std::move(key), {}, {}};
  f.get = [access](const RunConfig& c) {
    const T v = access(const_cast<RunConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  };
  const std::string name = f.name();
  f.set = [access, name](RunConfig& c, const std::string& text) { access(c) = parse_number<T>(text, name); };
  return f;
}

#define IRL_D(sec, key, expr) number<double>(sec, key, [](RunConfig& c) -> double& { return expr; })
#define IRL_I(sec, key, expr) number<int>(sec, key, [](RunConfig& c) -> int& { return expr; })
#define IRL_U(sec, key, expr) number<std::uint64_t>(sec, key, [](RunConfig& c) -> std::uint64_t& { return expr; })
#define IRL_Z(sec, key, expr) number<std::size_t>(sec, key, [](RunConfig& c) -> std::size_t& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back({"run", "ablation", [](const RunConfig& c) { return to_string(c.ablation); },
                 [](RunConfig& c, const std::string& v) { c.ablation = ablation_from_string(v); }});
    t.push_back(IRL_U("run", "total_steps", c.total_steps));
    t.push_back(IRL_U("run", "curriculum_switch_step", c.curriculum_switch_step));
    t.push_back(IRL_U("run", "master_seed", c.master_seed));
    t.push_back(IRL_U("run", "benchmark_seed", c.benchmark_seed));
    t.push_back(IRL_I("run", "train_begin", c.train_split.begin));
    t.push_back(IRL_I("run", "train_end", c.train_split.end));
    t.push_back(IRL_I("run", "val_begin", c.val_split.begin));
    t.push_back(IRL_I("run", "val_end", c.val_split.end));
    t.push_back(IRL_I("run", "eval_begin", c.eval_split.begin));
    t.push_back(IRL_I("run", "eval_end", c.eval_split.end));
    t.push_back(IRL_U("run", "eval_every", c.eval_every));
    t.push_back(IRL_I("run", "eval_episodes", c.eval_episodes));

    t.push_back(IRL_Z("agent", "replay_capacity", c.agent.replay_capacity));
    t.push_back(IRL_I("agent", "batch_size", c.agent.batch_size));
    t.push_back(IRL_D("agent", "discount", c.agent.discount));
    t.push_back(IRL_D("agent", "learning_rate", c.agent.learning_rate));
    t.push_back(IRL_D("agent", "epsilon_start", c.agent.epsilon_start));
    t.push_back(IRL_D("agent", "epsilon_end", c.agent.epsilon_end));
    t.push_back(IRL_D("agent", "epsilon_fraction", c.agent.epsilon_fraction));
    t.push_back(IRL_I("agent", "target_sync", c.agent.target_sync));
    t.push_back(IRL_I("agent", "train_every", c.agent.train_every));
    t.push_back(IRL_I("agent", "learning_starts", c.agent.learning_starts));
    t.push_back(IRL_D("agent", "huber_delta", c.agent.huber_delta));
    t.push_back(IRL_D("agent", "adam_beta1", c.agent.adam_beta1));
    t.push_back(IRL_D("agent", "adam_beta2", c.agent.adam_beta2));
    t.push_back(IRL_D("agent", "adam_epsilon", c.agent.adam_epsilon));

    t.push_back(IRL_D("world", "v_const", c.world.v_const));
    t.push_back(IRL_D("world", "t_const", c.world.t_const));
    t.push_back(IRL_D("world", "dt", c.world.dt));
    t.push_back(IRL_I("world", "step_budget", c.world.step_budget));
    t.push_back(IRL_D("world", "offroad_margin", c.world.offroad_margin));
    t.push_back(IRL_D("world", "activation_ahead", c.world.activation_ahead));
    t.push_back(IRL_D("world", "activation_behind", c.world.activation_behind));
    t.push_back(IRL_D("world", "d_target_tolerance", c.world.d_target_tolerance));
    t.push_back(IRL_D("world", "wheelbase", c.world.limits.wheelbase));
    t.push_back(IRL_D("world", "accel_min", c.world.limits.accel_min));
    t.push_back(IRL_D("world", "accel_max", c.world.limits.accel_max));
    t.push_back(IRL_D("world", "steer_max", c.world.limits.steer_max));
    t.push_back(IRL_D("world", "speed_max", c.world.limits.speed_max));
    t.push_back(IRL_D("world", "vehicle_length", c.world.limits.length));
    t.push_back(IRL_D("world", "vehicle_width", c.world.limits.width));
    t.push_back(IRL_D("world", "pid_speed_kp", c.world.tracker.longitudinal.kp));
    t.push_back(IRL_D("world", "pid_speed_ki", c.world.tracker.longitudinal.ki));
    t.push_back(IRL_D("world", "pid_speed_kd", c.world.tracker.longitudinal.kd));
    t.push_back(IRL_D("world", "pid_steer_kp", c.world.tracker.lateral.kp));
    t.push_back(IRL_D("world", "pid_steer_ki", c.world.tracker.lateral.ki));
    t.push_back(IRL_D("world", "pid_steer_kd", c.world.tracker.lateral.kd));
    t.push_back(IRL_D("world", "tracker_lookahead", c.world.tracker.lookahead));

    t.push_back({"rulebook", "file", [](const RunConfig& c) { return c.rulebook_file; },
                 [](RunConfig& c, const std::string& v) { c.rulebook_file = v; }});
    return t;
  }();
  return table;
}

#undef IRL_D
#undef IRL_I
#undef IRL_U
#undef IRL_Z

// 1-based line of `key` inside `[section]`, 0 when not found.
int line_of(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line, current;
  int n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
    } else if (current == section) {
      const auto eq = t.find('=');
      if (eq != std::string::npos && trim(t.substr(0, eq)) == key) return n;
    }
  }
  return 0;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void check_range(const IndexRange& r, const std::string& name) {
  check(r.begin >= 0, "run." + name + "_begin must be non-negative");
  check(r.end > r.begin, "run." + name + "_end must exceed run." + name + "_begin");
}

bool overlap(const IndexRange& a, const IndexRange& b) { return a.begin < b.end && b.begin < a.end; }

}  // namespace

void RunConfig::validate() const {
  check(total_steps >= 1, "run.total_steps must be at least 1");
  check(curriculum_switch_step < total_steps, "run.curriculum_switch_step must be less than run.total_steps");
  check_range(train_split, "train");
  check_range(val_split, "val");
  check_range(eval_split, "eval");
  check(!overlap(train_split, eval_split), "run.train and run.eval splits overlap");
  check(!overlap(train_split, val_split), "run.train and run.val splits overlap");
  check(!overlap(val_split, eval_split), "run.val and run.eval splits overlap");
  check(eval_episodes >= 1, "run.eval_episodes must be at least 1");
  check(eval_episodes <= val_split.size(), "run.eval_episodes exceeds the validation split");
  try {
    agent.validate();
  } catch (const agent::AgentError& e) {
    throw ConfigError(e.what());
  }
  const auto& w = world;
  check(w.v_const > 0.0, "world.v_const must be positive");
  check(w.t_const > 0.0, "world.t_const must be positive");
  check(w.dt > 0.0 && w.dt <= w.t_const, "world.dt must lie in (0, world.t_const]");
  check(w.step_budget >= 1, "world.step_budget must be at least 1");
  check(w.offroad_margin >= 0.0, "world.offroad_margin must be non-negative");
  check(w.activation_ahead >= 0.0, "world.activation_ahead must be non-negative");
  check(w.activation_behind >= 0.0, "world.activation_behind must be non-negative");
  check(w.d_target_tolerance > 0.0, "world.d_target_tolerance must be positive");
  check(w.limits.wheelbase > 0.0, "world.wheelbase must be positive");
  check(w.limits.accel_min < 0.0 && w.limits.accel_max > 0.0, "world.accel_min must be negative and world.accel_max positive");
  check(w.limits.steer_max > 0.0, "world.steer_max must be positive");
  check(w.limits.speed_max > 0.0, "world.speed_max must be positive");
  check(w.limits.length > 0.0 && w.limits.width > 0.0, "world.vehicle_length and world.vehicle_width must be positive");
  check(w.tracker.lookahead >= 0.0, "world.tracker_lookahead must be non-negative");
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_ini(a) == to_ini(b); }

RunConfig parse_config(const std::string& text, const std::string& source) {
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
  }
  std::set<std::string> sections;
  for (const Field& f : fields()) sections.insert(f.section);

  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (!sections.contains(section)) {
      if (body.empty() && !body.data().empty()) {
        throw ConfigError(source + ": key '" + section + "' must belong to a section ([run], [agent], [world] or [rulebook])");
      }
      throw ConfigError(source + ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      const auto it = std::find_if(fields().begin(), fields().end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
      const int line = line_of(text, section, key);
      const std::string where = source + (line > 0 ? ":" + std::to_string(line) : std::string{});
      if (it == fields().end()) throw ConfigError(where + ": unknown key " + section + "." + key);
      try {
        it->set(config, value.get_value<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig config = parse_config(buf.str(), path.string());
  // A relative rulebook path is taken relative to the config file.
  if (!config.rulebook_file.empty() && std::filesystem::path(config.rulebook_file).is_relative()) {
    config.rulebook_file = (path.parent_path() / config.rulebook_file).lexically_normal().string();
  }
  return config;
}

std::string to_ini(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

}  // namespace irl::harness
