// Acceptance checks, one PASS/FAIL line per criterion. Training runs go to
// <build>/acceptance_runs. `--only 1,2,7` restricts the set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "irl/geometry.hpp"
#include "irl/harness.hpp"
#include "irl/ltl.hpp"
#include "irl/rng.hpp"
#include "irl/rulebook.hpp"
#include "irl/scenario.hpp"
#include "irl/text.hpp"
#include "irl/trajectory.hpp"
#include "irl/vehicle.hpp"
#include "support/eq5.hpp"
#include "support/ltl_oracle.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace irl;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Verdict ltl_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(1, "acceptance.ltl"));
  int mismatches = 0, duality = 0;
  for (int i = 0; i < 10000; ++i) {
    const ltl::Formula f = testing::random_formula(rng, 4);
    const ltl::Formula g = testing::random_formula(rng, 3);
    const ltl::Trace t = testing::random_trace(rng, 8);
    const auto expected = testing::truth_table(f, t);
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (ltl::eval_formula(f, t, k) != expected[k]) ++mismatches;
      if (ltl::eval_formula(ltl::Globally(f), t, k) != !ltl::eval_formula(ltl::Finally(ltl::Not(f)), t, k)) ++duality;
      if (ltl::eval_formula(ltl::Finally(g), t, k) !=
          ltl::eval_formula(ltl::Until(ltl::Formula::constant(true), g), t, k)) {
        ++duality;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && duality == 0 && secs < 10.0,
          "10000 pairs, " + std::to_string(mismatches) + " mismatches, " + std::to_string(duality) +
              " duality failures, " + fmt(secs, 3) + " s"};
}

Verdict polynomial_residuals() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(1, "acceptance.poly"));
  double quintic = 0.0, quartic = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double d0 = rng.uniform(-5, 5), v0 = rng.uniform(-3, 3), a0 = rng.uniform(-2, 2);
    const double dT = rng.uniform(-5, 5), T = rng.uniform(0.5, 6);
    const auto q = trajectory::solve_lateral_quintic(d0, v0, a0, dT, T);
    quintic = std::max({quintic, std::abs(q.value(0) - d0), std::abs(q.derivative(0, 1) - v0),
                        std::abs(q.derivative(0, 2) - a0), std::abs(q.value(T) - dT), std::abs(q.derivative(T, 1)),
                        std::abs(q.derivative(T, 2))});
  }
  for (int i = 0; i < 1000; ++i) {
    const double s0 = rng.uniform(0, 80), v0 = rng.uniform(0, 15), a0 = rng.uniform(-3, 3);
    const double vT = rng.uniform(0, 15), T = rng.uniform(0.5, 6);
    const auto q = trajectory::solve_longitudinal_quartic(s0, v0, a0, vT, T);
    quartic = std::max({quartic, std::abs(q.value(0) - s0), std::abs(q.derivative(0, 1) - v0),
                        std::abs(q.derivative(0, 2) - a0), std::abs(q.derivative(T, 1) - vT),
                        std::abs(q.derivative(T, 2))});
  }
  const double secs = seconds_since(t0);
  return {quintic < 1e-9 && quartic < 1e-9 && secs < 1.0,
          "max residual quintic " + fmt(quintic) + ", quartic " + fmt(quartic) + ", " + fmt(secs, 3) + " s"};
}

ltl::Trace random_rule_trace(Rng& rng) {
  ltl::Trace t(1 + rng.uniform_index(30));
  for (auto& s : t) {
    s[world::kNoCollision] = !rng.bernoulli(0.05);
    s[world::kInLane] = !rng.bernoulli(0.1);
    s[world::kNoOutRoad] = !rng.bernoulli(0.05);
  }
  return t;
}

std::map<std::string, double> rule_weights(double l) {
  return {{rulebook::kCollisionRule, 1.0}, {rulebook::kInLaneRule, l}, {rulebook::kOnRoadRule, l}};
}

Verdict rulebook_expansion() {
  Rng rng(derive_seed(1, "acceptance.rulebook"));
  rulebook::Rulebook rb = rulebook::default_rulebook();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ltl::Trace t = random_rule_trace(rng);
    const double l = rng.uniform(0.0, 10.0);
    const bool active = rng.bernoulli(0.5);
    rb.set_active(active);
    const double generic = rulebook::rulebook_reward(rb, t, rule_weights(l)).total;
    worst = std::max(worst, std::abs(generic - testing::expanded_rulebook_reward(t, l, active)));
  }
  return {worst < 1e-12, "1000 traces, max |generic - expanded| = " + fmt(worst)};
}

Verdict situation_scaling() {
  Rng rng(derive_seed(1, "acceptance.scaling"));
  rulebook::Rulebook rb = rulebook::default_rulebook();
  double worst = 0.0;
  int cases = 0;
  for (int i = 0; i < 1000; ++i) {
    ltl::Trace t = random_rule_trace(rng);
    for (auto& s : t) s[world::kNoCollision] = true;
    // At least one lane or road violation.
    auto& s = t[rng.uniform_index(t.size())];
    s[rng.bernoulli(0.5) ? world::kInLane : world::kNoOutRoad] = false;
    const double l = rng.uniform(0.01, 10.0);
    rb.set_active(true);
    const double on = rulebook::rulebook_reward(rb, t, rule_weights(l)).total;
    rb.set_active(false);
    const double off = rulebook::rulebook_reward(rb, t, rule_weights(l)).total;
    worst = std::max(worst, std::abs(on / off - 0.1));
    ++cases;
  }
  return {worst <= 1e-15, std::to_string(cases) + " traces, max |ratio - 0.1| = " + fmt(worst)};
}

Verdict frenet_round_trip() {
  Rng rng(derive_seed(1, "acceptance.frenet"));
  std::vector<geometry::ReferencePath> paths;
  int curved = 0;
  for (int i = 0; paths.size() < 20; ++i) {
    const auto sc = world::benchmark_scenario(42, i, world::ScenarioKind::Normal);
    const bool straight = std::abs(sc.path.waypoints().back().y) < 1e-9;
    if (!straight) ++curved;
    // Keep a mix: at most 15 curved, at least 5 straight where available.
    if (!straight && curved > 15) continue;
    paths.push_back(sc.path);
  }
  paths.push_back(geometry::build_reference_path(std::vector<geometry::Vec2>{{0, 0}, {80, 0}}));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto& path = paths[static_cast<std::size_t>(i) % paths.size()];
    const double s = rng.uniform(0.0, path.total_length());
    const double d = rng.uniform(-geometry::kCorridorHalfWidth * 0.99, geometry::kCorridorHalfWidth * 0.99);
    const geometry::Vec2 p = path.to_cartesian(s, d);
    const auto fp = path.to_frenet(p);
    worst = std::max(worst, geometry::distance(path.to_cartesian(fp.s, fp.d), p));
  }
  const int curved_used = std::min(curved, 15);
  return {worst < 1e-6, "1000 points on " + std::to_string(paths.size()) + " paths (" + std::to_string(curved_used) +
                            " curved), max error " + fmt(worst) + " m"};
}

Verdict controller_tracking() {
  const auto path = geometry::build_reference_path(std::vector<geometry::Vec2>{{0, 0}, {80, 0}});
  geometry::FrenetPose start;
  start.s = 5.0;
  start.s_dot = 8.0;
  const auto traj = trajectory::generate_trajectory(start, {8.0, 3.5, 3.0}, path, 0.1);
  world::VehicleState v;
  v.position = path.to_cartesian(5.0, 0.0);
  v.heading = path.heading_at(5.0);
  v.speed = 8.0;
  world::refresh_frenet(v, path);
  world::TrajectoryTracker tracker{world::TrackerGains{}};
  tracker.follow(traj);
  double worst = 0.0;
  for (int i = 0; i < 30; ++i) {
    v = world::step_vehicle(v, tracker.track(v, 0.1), 0.1, world::VehicleLimits{});
    world::refresh_frenet(v, path);
    worst = std::max(worst, world::cross_track_error(traj, v.position));
  }
  return {worst < 0.4, "max cross-track error " + fmt(worst) + " m over the 3 s lane change"};
}

Verdict scenario_solvability(const fs::path& source_dir, const fs::path& work) {
  // Regeneration: two fresh writes and the shipped copy must agree byte for byte.
  const fs::path a = work / "bench_a", b = work / "bench_b";
  fs::remove_all(a);
  fs::remove_all(b);
  world::write_benchmark(a, 1000, 42, world::ScenarioKind::Anomaly);
  world::write_benchmark(b, 1000, 42, world::ScenarioKind::Anomaly);
  const fs::path shipped = source_dir / "bench" / "anomaly";
  int differing = 0, shipped_differing = 0;
  for (int i = 0; i < 1000; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%04d.json", i);
    const std::string x = slurp(a / "anomaly" / name);
    if (x.empty() || x != slurp(b / "anomaly" / name)) ++differing;
    if (x != slurp(shipped / name)) ++shipped_differing;
  }

  harness::RunConfig config;
  harness::Setup setup = harness::apply_ablation(config);
  const auto scenarios = world::load_scenarios(a / "anomaly");
  int solved = 0;
  std::vector<int> failed;
  for (const auto& sc : scenarios) {
    const auto r = harness::run_policy_episode(setup, sc, testing::avoid_and_return);
    if (r.finished_score == 1.0) {
      ++solved;
    } else {
      failed.push_back(sc.id);
    }
  }
  const double rate = static_cast<double>(solved) / static_cast<double>(scenarios.size());
  std::string ids;
  for (std::size_t i = 0; i < failed.size() && i < 20; ++i) ids += (i ? " " : "") + std::to_string(failed[i]);
  return {rate >= 0.95 && differing == 0 && shipped_differing == 0 && scenarios.size() == 1000,
          "oracle solved " + std::to_string(solved) + "/" + std::to_string(scenarios.size()) +
              (failed.empty() ? "" : " (failed: " + ids + (failed.size() > 20 ? " ..." : "") + ")") +
              "; regeneration differs in " + std::to_string(differing) + " files, shipped copy in " +
              std::to_string(shipped_differing)};
}

struct RunResult {
  harness::Ablation ablation;
  std::uint64_t seed;
  fs::path dir;
  harness::EvalSummary eval;
  double minutes;
};

RunResult train_and_evaluate(harness::Ablation ablation, std::uint64_t seed, const fs::path& dir) {
  harness::RunConfig config;
  config.ablation = ablation;
  config.master_seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all(dir);
  harness::TrainOptions options;
  options.out_dir = dir;
  const auto summary = harness::train(config, options);
  harness::Setup setup = harness::apply_ablation(config);
  const auto net = agent::load_checkpoint(summary.checkpoint);
  const auto held_out = harness::split_scenarios(config, config.eval_split, world::ScenarioKind::Anomaly);
  auto eval = harness::evaluate(setup, net, held_out);
  harness::write_eval_rows(eval, dir / "heldout_rows.csv");
  harness::write_eval_summary(eval, dir / "heldout_summary.json");
  const double minutes = seconds_since(t0) / 60.0;
  std::cout << "  [" << harness::to_string(ablation) << " seed " << seed << "] held-out finished "
            << fmt(eval.mean_finished_score) << ", arrived " << fmt(eval.mean_arrived_distance) << " m, "
            << fmt(minutes, 3) << " min\n"
            << std::flush;
  return {ablation, seed, dir, std::move(eval), minutes};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + fmt(v[i], 3);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    }
  }
  auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

  const fs::path source_dir = IRL_SOURCE_DIR;
  const fs::path work = fs::path(IRL_BINARY_DIR) / "acceptance_runs";
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << v.detail << '\n'
              << std::flush;
    if (!v.pass) ++failures;
  };
  auto guarded = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
    if (!wanted(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "LTL oracle equivalence", ltl_equivalence);
  guarded(2, "polynomial solvers", polynomial_residuals);
  guarded(3, "generic rulebook reward equals closed form", rulebook_expansion);
  guarded(4, "situation-awareness scaling", situation_scaling);
  guarded(5, "Frenet round trip", frenet_round_trip);
  guarded(6, "controller tracking", controller_tracking);
  guarded(7, "scenario solvability", [&] { return scenario_solvability(source_dir, work); });

  const bool learning = wanted(8) || wanted(9) || wanted(10);
  std::vector<RunResult> runs;
  std::string run_error;
  if (learning) {
    try {
      const std::vector<harness::Ablation> ablations =
          wanted(9) ? std::vector<harness::Ablation>{harness::Ablation::Combination, harness::Ablation::Trajectory,
                                                     harness::Ablation::Baseline}
                    : std::vector<harness::Ablation>{harness::Ablation::Combination};
      for (auto a : ablations) {
        if (a == harness::Ablation::Combination && !wanted(8) && !wanted(9)) continue;
        for (std::uint64_t seed : {1, 2, 3}) {
          runs.push_back(train_and_evaluate(a, seed, work / (harness::to_string(a) + "_seed" + std::to_string(seed))));
        }
      }
    } catch (const std::exception& e) {
      run_error = e.what();
    }
  }
  auto scores = [&](harness::Ablation a, bool arrived) {
    std::vector<double> v;
    for (const auto& r : runs) {
      if (r.ablation == a) v.push_back(arrived ? r.eval.mean_arrived_distance : r.eval.mean_finished_score);
    }
    return v;
  };

  guarded(8, "learning at desk scale", [&]() -> Verdict {
    if (!run_error.empty()) return {false, "training failed: " + run_error};
    const auto f = scores(harness::Ablation::Combination, false);
    const auto d = scores(harness::Ablation::Combination, true);
    const double mf = median(f), md = median(d);
    return {mf >= 0.8 && md >= 70.0, "combination over 3 seeds: finished " + list(f) + " (median " + fmt(mf, 3) +
                                         "), arrived " + list(d) + " m (median " + fmt(md, 3) + ")"};
  });

  guarded(9, "ablation ordering", [&]() -> Verdict {
    if (!run_error.empty()) return {false, "training failed: " + run_error};
    const double c = median(scores(harness::Ablation::Combination, false));
    const double t = median(scores(harness::Ablation::Trajectory, false));
    const double b = median(scores(harness::Ablation::Baseline, false));
    return {c >= t && t > b && b <= 0.3, "median finished combination " + fmt(c, 3) + ", trajectory " + fmt(t, 3) +
                                             ", baseline " + fmt(b, 3) + " (" +
                                             list(scores(harness::Ablation::Baseline, false)) + ")"};
  });

  guarded(10, "end-to-end determinism", [&]() -> Verdict {
    const fs::path first = work / "determinism_a", second = work / "determinism_b";
    fs::path reference;
    for (const auto& r : runs) {
      if (r.ablation == harness::Ablation::Combination && r.seed == 1) reference = r.dir;
    }
    if (reference.empty()) reference = train_and_evaluate(harness::Ablation::Combination, 1, first).dir;
    const fs::path repeat = train_and_evaluate(harness::Ablation::Combination, 1, second).dir;
    const std::string m1 = slurp(reference / "metrics.csv"), m2 = slurp(repeat / "metrics.csv");
    const std::string e1 = slurp(reference / "eval.csv"), e2 = slurp(repeat / "eval.csv");
    const bool same = !m1.empty() && m1 == m2 && e1 == e2;
    return {same, "two combination runs with master seed 1: metrics.csv " +
                      std::string(m1 == m2 ? "identical" : "differs") + " (" + std::to_string(m1.size()) +
                      " bytes), eval.csv " + (e1 == e2 ? "identical" : "differs")};
  });

  std::cout << (failures == 0 ? "all selected criteria passed" : std::to_string(failures) + " criteria failed")
            << '\n';
  return failures == 0 ? 0 : 1;
}
