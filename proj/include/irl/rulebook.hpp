#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "irl/ltl.hpp"

namespace irl::rulebook {

class RulebookError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of a rulebook definition, before its formula is parsed.
struct RuleSpec {
  std::string id;
  std::string formula;
  int level = 1;
  double scale = 1.0;
};

struct RuleRealization {
  std::string id;
  ltl::Formula formula;
  int level;     // 1 is the highest priority
  double scale;  // c_psi
};

struct RuleContribution {
  double penalty = 0.0;
  double coefficient = 1.0;
  double contribution = 0.0;
};

struct RulebookReward {
  double total = 0.0;
  std::map<std::string, RuleContribution> per_rule;
};

/// Rules grouped into contiguous priority levels 1..J, each with a damping
/// coefficient rho_j. While inactive every coefficient reads as 1.
class Rulebook {
 public:
  static Rulebook build(const std::vector<RuleSpec>& spec, const std::map<int, double>& coefficients);

  const std::vector<RuleRealization>& rules() const { return rules_; }
  const std::map<int, double>& level_coefficients() const { return coefficients_; }
  int level_count() const { return static_cast<int>(coefficients_.size()); }
  const RuleRealization& rule(const std::string& id) const;

  bool active() const { return active_; }
  void set_active(bool active) { active_ = active; }

  /// Product of rho over levels 1..level(rule) while active, else 1.
  double cumulative_coefficient(const std::string& rule_id) const;

  /// Sum over rules of coefficient * penalty * scale * weight.
  RulebookReward reward(const ltl::Trace& trace, const std::map<std::string, double>& weights) const;

  std::vector<RuleSpec> specs() const;

 private:
  std::vector<RuleRealization> rules_;
  std::vector<std::string> formula_text_;
  std::map<int, double> coefficients_;
  bool active_ = false;
};

Rulebook build_rulebook(const std::vector<RuleSpec>& spec, const std::map<int, double>& coefficients);
double cumulative_coefficient(const Rulebook& rb, const std::string& rule_id);
RulebookReward rulebook_reward(const Rulebook& rb, const ltl::Trace& trace,
                               const std::map<std::string, double>& per_rule_weights);

inline constexpr const char* kCollisionRule = "psi1";
inline constexpr const char* kInLaneRule = "psi2";
inline constexpr const char* kOnRoadRule = "psi3";

/// Scale defaults for the shipped rule set.
inline constexpr double kCollisionScale = 10.0;
inline constexpr double kLaneScale = 1.0;
inline constexpr double kRoadScale = 1.0;

/// Collision avoidance above lane keeping and road keeping.
std::vector<RuleSpec> default_rule_specs();
std::map<int, double> default_coefficients();
Rulebook default_rulebook();

/// Versioned JSON rulebook file:
///   {"version": 1, "rules": [{"id", "formula", "level", "scale"}...],
///    "coefficients": {"1": 1.0, "2": 0.1}}
Rulebook load_rulebook(const std::filesystem::path& file);
std::string rulebook_to_json(const Rulebook& rb);
Rulebook rulebook_from_json(const std::string& text);

}  // namespace irl::rulebook
