#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "irl/agent.hpp"
#include "irl/environment.hpp"

namespace irl::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Ablation { Baseline, Trajectory, Rulebook, Combination };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& text);
std::uint32_t ablation_code(Ablation a);

/// Half-open range of benchmark indices.
struct IndexRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool contains(int i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct RunConfig {
  Ablation ablation = Ablation::Combination;
  std::uint64_t total_steps = 40000;
  std::uint64_t curriculum_switch_step = 3000;
  std::uint64_t master_seed = 1;
  std::uint64_t benchmark_seed = 42;
  IndexRange train_split{0, 800};
  IndexRange val_split{800, 900};
  IndexRange eval_split{900, 1000};
  std::uint64_t eval_every = 2000;  // 0 disables periodic evaluation
  int eval_episodes = 20;           // drawn from the validation split
  agent::AgentConfig agent;
  world::WorldConfig world;
  std::string rulebook_file;  // empty: built-in rule set; relative to the config file when loaded

  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

/// Sectioned key = value text. Unknown sections or keys are errors; missing
/// keys keep their defaults.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
std::string to_ini(const RunConfig& config);

}  // namespace irl::harness
