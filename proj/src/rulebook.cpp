#include "irl/rulebook.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace irl::rulebook {

namespace {
constexpr int kFileVersion = 1;
}

Rulebook Rulebook::build(const std::vector<RuleSpec>& spec, const std::map<int, double>& coefficients) {
  if (spec.empty()) throw RulebookError("rulebook needs at least one rule");
  Rulebook rb;
  std::set<std::string> ids;
  std::set<int> levels;
  for (const RuleSpec& row : spec) {
    if (row.id.empty()) throw RulebookError("rule with empty id");
    if (!ids.insert(row.id).second) throw RulebookError("duplicate rule id '" + row.id + "'");
    if (row.level < 1) throw RulebookError("rule '" + row.id + "' has level < 1");
    if (!(row.scale > 0.0)) throw RulebookError("rule '" + row.id + "' needs a positive scale");
    ltl::Formula f = [&] {
      try {
        return ltl::parse_ltl(row.formula);
      } catch (const ltl::ParseError& e) {
        throw RulebookError("rule '" + row.id + "': " + e.what());
      }
    }();
    rb.rules_.push_back({row.id, std::move(f), row.level, row.scale});
    rb.formula_text_.push_back(row.formula);
    levels.insert(row.level);
  }
  const int top = *levels.rbegin();
  for (int j = 1; j <= top; ++j) {
    if (!levels.contains(j)) {
      throw RulebookError("hierarchy levels must be contiguous from 1; level " + std::to_string(j) +
                          " is empty");
    }
    const auto it = coefficients.find(j);
    if (it == coefficients.end()) throw RulebookError("missing coefficient for level " + std::to_string(j));
    if (!(it->second >= 0.0 && it->second <= 1.0)) {
      throw RulebookError("coefficient for level " + std::to_string(j) + " outside [0, 1]");
    }
    rb.coefficients_[j] = it->second;
  }
  for (const auto& [level, value] : coefficients) {
    if (level < 1 || level > top) {
      throw RulebookError("coefficient given for unused level " + std::to_string(level));
    }
    (void)value;
  }
  return rb;
}

const RuleRealization& Rulebook::rule(const std::string& id) const {
  for (const auto& r : rules_) {
    if (r.id == id) return r;
  }
  throw RulebookError("unknown rule '" + id + "'");
}

double Rulebook::cumulative_coefficient(const std::string& rule_id) const {
  const RuleRealization& r = rule(rule_id);
  if (!active_) return 1.0;
  double product = 1.0;
  for (int j = 1; j <= r.level; ++j) product *= coefficients_.at(j);
  return product;
}

RulebookReward Rulebook::reward(const ltl::Trace& trace, const std::map<std::string, double>& weights) const {
  if (trace.empty()) throw RulebookError("rulebook reward needs a non-empty trace");
  RulebookReward out;
  for (const RuleRealization& r : rules_) {
    const auto w = weights.find(r.id);
    if (w == weights.end()) throw RulebookError("missing weight for rule '" + r.id + "'");
    RuleContribution c;
    c.penalty = ltl::rule_penalty(r.formula, trace);
    c.coefficient = cumulative_coefficient(r.id);
    c.contribution = c.coefficient * c.penalty * r.scale * w->second;
    out.total += c.contribution;
    out.per_rule[r.id] = c;
  }
  return out;
}

std::vector<RuleSpec> Rulebook::specs() const {
  std::vector<RuleSpec> out;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    out.push_back({rules_[i].id, formula_text_[i], rules_[i].level, rules_[i].scale});
  }
  return out;
}

Rulebook build_rulebook(const std::vector<RuleSpec>& spec, const std::map<int, double>& coefficients) {
  return Rulebook::build(spec, coefficients);
}

double cumulative_coefficient(const Rulebook& rb, const std::string& rule_id) {
  return rb.cumulative_coefficient(rule_id);
}

RulebookReward rulebook_reward(const Rulebook& rb, const ltl::Trace& trace,
                               const std::map<std::string, double>& per_rule_weights) {
  return rb.reward(trace, per_rule_weights);
}

std::vector<RuleSpec> default_rule_specs() {
  return {{kCollisionRule, "G(no_collision)", 1, kCollisionScale},
          {kInLaneRule, "G(in_lane)", 2, kLaneScale},
          {kOnRoadRule, "G(no_out_road)", 2, kRoadScale}};
}

std::map<int, double> default_coefficients() { return {{1, 1.0}, {2, 0.1}}; }

Rulebook default_rulebook() { return Rulebook::build(default_rule_specs(), default_coefficients()); }

std::string rulebook_to_json(const Rulebook& rb) {
  nlohmann::ordered_json j;
  j["version"] = kFileVersion;
  j["rules"] = nlohmann::ordered_json::array();
  for (const RuleSpec& s : rb.specs()) {
    nlohmann::ordered_json row;
    row["id"] = s.id;
    row["formula"] = s.formula;
    row["level"] = s.level;
    row["scale"] = s.scale;
    j["rules"].push_back(row);
  }
  nlohmann::ordered_json coeffs;
  for (const auto& [level, rho] : rb.level_coefficients()) coeffs[std::to_string(level)] = rho;
  j["coefficients"] = coeffs;
  return j.dump(2) + "\n";
}

Rulebook rulebook_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw RulebookError(std::string("rulebook file is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kFileVersion) {
      throw RulebookError("unsupported rulebook file version " + std::to_string(version));
    }
    std::vector<RuleSpec> spec;
    for (const auto& row : j.at("rules")) {
      spec.push_back({row.at("id").get<std::string>(), row.at("formula").get<std::string>(),
                      row.at("level").get<int>(), row.at("scale").get<double>()});
    }
    std::map<int, double> coeffs;
    for (const auto& [key, value] : j.at("coefficients").items()) {
      coeffs[std::stoi(key)] = value.get<double>();
    }
    return Rulebook::build(spec, coeffs);
  } catch (const nlohmann::json::exception& e) {
    throw RulebookError(std::string("malformed rulebook file: ") + e.what());
  }
}

Rulebook load_rulebook(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw RulebookError("cannot open rulebook file " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return rulebook_from_json(buffer.str());
}

}  // namespace irl::rulebook
