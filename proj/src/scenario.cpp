#include "irl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "irl/rng.hpp"

namespace irl::world {

namespace {

constexpr int kFileVersion = 1;

std::vector<geometry::Vec2> route_waypoints(double curvature) {
  const auto count = static_cast<std::size_t>(std::llround(kRouteLength / kPathSpacing));
  std::vector<geometry::Vec2> pts;
  pts.reserve(count + 1);
  if (curvature == 0.0) {
    for (std::size_t i = 0; i <= count; ++i) pts.push_back({static_cast<double>(i) * kPathSpacing, 0.0});
    return pts;
  }
  // Chords of exactly kPathSpacing along a circle, so the polyline length is
  // the route length.
  const double radius = 1.0 / std::abs(curvature);
  const double sign = curvature > 0.0 ? 1.0 : -1.0;
  const double step = 2.0 * std::asin(0.5 * kPathSpacing / radius);
  for (std::size_t i = 0; i <= count; ++i) {
    const double phi = static_cast<double>(i) * step;
    pts.push_back({radius * std::sin(phi), sign * radius * (1.0 - std::cos(phi))});
  }
  return pts;
}

}  // namespace

std::string to_string(ScenarioKind kind) { return kind == ScenarioKind::Normal ? "normal" : "anomaly"; }

ScenarioKind scenario_kind_from_string(const std::string& text) {
  if (text == "normal") return ScenarioKind::Normal;
  if (text == "anomaly") return ScenarioKind::Anomaly;
  throw ScenarioError("unknown scenario kind '" + text + "' (expected normal or anomaly)");
}

Scenario generate_scenario(std::uint64_t seed, ScenarioKind kind, int id) {
  Rng rng(derive_seed(seed, "scenario"));
  double curvature = 0.0;
  if (rng.bernoulli(0.5)) {
    const double magnitude = rng.uniform(0.25, 1.0) * kMaxCurvature;
    curvature = rng.bernoulli(0.5) ? magnitude : -magnitude;
  }
  // Obstacle draws happen for both kinds so the route does not depend on kind.
  Obstacle obstacle;
  obstacle.s_center = rng.uniform(kObstacleMinS, kObstacleMaxS);
  obstacle.length = rng.uniform(2.0, 5.0);
  obstacle.width = kLaneWidth * rng.uniform(0.6, 1.0);

  Scenario sc;
  sc.id = id;
  const auto pts = route_waypoints(curvature);
  sc.path = geometry::ReferencePath::build(pts);
  sc.lane_width = kLaneWidth;
  if (kind == ScenarioKind::Anomaly) sc.obstacle = obstacle;
  sc.goal = {sc.path.total_length() - kGoalMargin, 0.0};
  sc.kind = kind;
  sc.seed = seed;
  return sc;
}

std::uint64_t benchmark_scenario_seed(std::uint64_t benchmark_seed, int index) {
  return derive_seed(benchmark_seed, "benchmark", static_cast<std::uint64_t>(index));
}

Scenario benchmark_scenario(std::uint64_t benchmark_seed, int index, ScenarioKind kind) {
  return generate_scenario(benchmark_scenario_seed(benchmark_seed, index), kind, index);
}

void validate_scenario(const Scenario& sc) {
  if (sc.path.total_length() < kRouteLength - 1e-6) {
    throw ScenarioError("scenario " + std::to_string(sc.id) + ": route shorter than 80 m");
  }
  if (!(sc.lane_width > 0.0)) throw ScenarioError("lane_width must be positive");
  if (sc.kind == ScenarioKind::Anomaly) {
    if (!sc.obstacle) throw ScenarioError("anomaly scenario without obstacle");
    if (sc.obstacle->s_center < kObstacleMinS || sc.obstacle->s_center > kObstacleMaxS) {
      throw ScenarioError("obstacle s_center outside [15, 60]");
    }
    if (!(sc.obstacle->length > 0.0 && sc.obstacle->width > 0.0)) {
      throw ScenarioError("obstacle needs positive length and width");
    }
  } else if (sc.obstacle) {
    throw ScenarioError("normal scenario with obstacle");
  }
  if (std::abs(sc.goal.s_target - (sc.path.total_length() - kGoalMargin)) > 1e-9) {
    throw ScenarioError("goal s_target must be route length - 2 m");
  }
  if (sc.goal.d_target != 0.0) throw ScenarioError("goal d_target must be 0");
}

std::string scenario_to_json(const Scenario& sc) {
  nlohmann::ordered_json j;
  j["version"] = kFileVersion;
  j["id"] = sc.id;
  j["kind"] = to_string(sc.kind);
  j["seed"] = sc.seed;
  j["lane_width"] = sc.lane_width;
  j["goal"] = {{"s_target", sc.goal.s_target}, {"d_target", sc.goal.d_target}};
  if (sc.obstacle) {
    j["obstacle"] = {{"s_center", sc.obstacle->s_center},
                     {"length", sc.obstacle->length},
                     {"width", sc.obstacle->width}};
  } else {
    j["obstacle"] = nullptr;
  }
  auto& wp = j["path"]["waypoints"];
  wp = nlohmann::ordered_json::array();
  for (const auto& p : sc.path.waypoints()) wp.push_back({p.x, p.y});
  return j.dump() + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kFileVersion) throw ScenarioError("unsupported scenario version " + std::to_string(version));
    Scenario sc;
    sc.id = j.at("id").get<int>();
    sc.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.lane_width = j.at("lane_width").get<double>();
    sc.goal = {j.at("goal").at("s_target").get<double>(), j.at("goal").at("d_target").get<double>()};
    if (!j.at("obstacle").is_null()) {
      const auto& o = j.at("obstacle");
      sc.obstacle = Obstacle{o.at("s_center").get<double>(), o.at("length").get<double>(),
                             o.at("width").get<double>()};
    }
    std::vector<geometry::Vec2> pts;
    for (const auto& p : j.at("path").at("waypoints")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    sc.path = geometry::ReferencePath::build(pts);
    validate_scenario(sc);
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed scenario file: ") + e.what());
  } catch (const geometry::GeometryError& e) {
    throw ScenarioError(std::string("scenario path invalid: ") + e.what());
  }
}

void save_scenario(const Scenario& sc, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ScenarioError("cannot write scenario file " + file.string());
  out << scenario_to_json(sc);
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return scenario_from_json(buffer.str());
  } catch (const ScenarioError& e) {
    throw ScenarioError(file.string() + ": " + e.what());
  }
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& file_or_dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(file_or_dir)) throw ScenarioError("scenario path does not exist: " + file_or_dir.string());
  if (!fs::is_directory(file_or_dir)) return {load_scenario(file_or_dir)};
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(file_or_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_scenario(f));
  return out;
}

std::vector<std::filesystem::path> write_benchmark(const std::filesystem::path& out_dir, int count,
                                                   std::uint64_t benchmark_seed, ScenarioKind kind) {
  namespace fs = std::filesystem;
  if (count < 0) throw ScenarioError("scenario count must be non-negative");
  const fs::path dir = out_dir / to_string(kind);
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.json", i);
    const fs::path file = dir / name;
    save_scenario(benchmark_scenario(benchmark_seed, i, kind), file);
    written.push_back(file);
  }
  return written;
}

}  // namespace irl::world
