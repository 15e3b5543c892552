#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "irl/scenario.hpp"

namespace irl::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenScenarios {
  int count = 1000;
  std::uint64_t seed = 42;
  std::filesystem::path out_dir;
  world::ScenarioKind kind = world::ScenarioKind::Anomaly;
};

struct Train {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  bool resume = false;
};

struct Eval {
  std::filesystem::path checkpoint;
  std::filesystem::path scenarios;  // file or directory
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> config;
};

struct Replay {
  std::filesystem::path checkpoint;
  std::filesystem::path scenario;
  std::filesystem::path out_csv;
  std::optional<std::filesystem::path> trajectory_dir;
  std::optional<std::filesystem::path> config;
};

struct PlotData {
  std::filesystem::path metrics;
  std::filesystem::path out_dir;
  int window = 50;
};

struct ValidateConfig {
  std::filesystem::path config;
};

struct Help {
  std::string text;
};

using Command = std::variant<Help, GenScenarios, Train, Eval, Replay, PlotData, ValidateConfig>;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Strict parse. Throws UsageError naming the offending argument.
Command parse_args(int argc, const char* const* argv);

/// Runs a parsed command. Throws on runtime failure.
void execute(const Command& command, std::ostream& out);

/// parse_args + execute with exit-code mapping and messages on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace irl::cli
