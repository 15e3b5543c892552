#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "irl/agent.hpp"

using namespace irl::agent;
using irl::world::ObservationGrid;

namespace {

NetworkShape toy_shape() {
  NetworkShape s;
  s.in_channels = 2;
  s.in_size = 12;
  s.conv1_filters = 2;
  s.conv1_kernel = 4;
  s.conv1_stride = 4;
  s.conv2_filters = 3;
  s.conv2_kernel = 3;
  s.conv2_stride = 2;
  s.hidden = 4;
  s.actions = 3;
  return s;
}

ObservationGrid random_grid(irl::Rng& rng, double density = 0.2) {
  ObservationGrid g;
  for (auto& c : g.cells) c = rng.bernoulli(density) ? 1.0f : 0.0f;
  return g;
}

std::size_t block_offset(const QNetwork<float>& net, const std::string& name) {
  for (const auto& b : net.blocks())
    if (b.name == name) return b.offset;
  FAIL("no block " << name);
  return 0;
}

Transition transition(irl::Rng& rng, int action, double reward, bool terminal) {
  return {PackedObservation(random_grid(rng)), action, reward, PackedObservation(random_grid(rng)), terminal};
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "irl_agent_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  AgentConfig c;
  CHECK(epsilon_at(c, 0, 40000) == 1.0);
  CHECK(epsilon_at(c, 5000, 40000) == doctest::Approx(1.0 - 0.95 * 0.5));
  CHECK(epsilon_at(c, 10000, 40000) == doctest::Approx(0.05));
  CHECK(epsilon_at(c, 39999, 40000) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("exploration is uniform at epsilon 1") {
  QNetwork<float> net;
  net.initialize(1);
  irl::Rng rng(4);
  const ObservationGrid obs;
  int counts[3] = {0, 0, 0};
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[act(net, obs, 1.0, rng)];
  const double p = 1.0 / 3.0, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 3 * sigma);
}

TEST_CASE("greedy action follows hand-set parameters and ties go low") {
  QNetwork<float> net;
  net.parameters().setZero();
  irl::Rng rng(1);
  const ObservationGrid obs;
  CHECK(act(net, obs, 0.0, rng) == 0);
  net.parameters()[static_cast<Eigen::Index>(block_offset(net, "fc2.bias") + 2)] = 1.0f;
  for (int i = 0; i < 50; ++i) CHECK(act(net, random_grid(rng), 0.0, rng) == 2);

  QNetwork<float>::Matrix q(3, 1);
  q << 0.5f, 0.5f, 0.5f;
  CHECK(argmax_action<float>(q) == 0);
  q << 0.1f, 0.7f, 0.7f;
  CHECK(argmax_action<float>(q) == 1);
}

TEST_CASE("observations pack losslessly") {
  irl::Rng rng(2);
  const auto g = random_grid(rng, 0.5);
  CHECK(PackedObservation(g).unpack() == g);
  std::vector<double> column(ObservationGrid::kCells);
  PackedObservation(g).write_to(column.data());
  for (std::size_t i = 0; i < column.size(); ++i) CHECK(column[i] == g.cells[i]);
}

TEST_CASE("network gradient matches central differences in every block") {
  QNetwork<double> net(toy_shape());
  irl::Rng rng(12);
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] = rng.uniform(-0.5, 0.5);
  QNetwork<double>::Matrix x(toy_shape().input_dim(), 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(0.0, 1.0);
  QNetwork<double>::Matrix w(3, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);

  auto loss = [&](const QNetwork<double>& n) { return (n.forward(x).array() * w.array()).sum(); };
  const auto g = net.gradient(x, w);
  const double h = 1e-5;
  for (const auto& block : net.blocks()) {
    double worst = 0.0;
    for (std::size_t k = 0; k < block.size; ++k) {
      const auto i = static_cast<Eigen::Index>(block.offset + k);
      QNetwork<double> plus = net, minus = net;
      plus.parameters()[i] += h;
      minus.parameters()[i] -= h;
      const double fd = (loss(plus) - loss(minus)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - g[i]) / scale);
    }
    CHECK_MESSAGE(worst < 1e-4, block.name);
  }
}

TEST_CASE("terminal transitions target the reward") {
  QNetwork<float> net, target;
  net.initialize(3);
  target.initialize(4);
  irl::Rng rng(5);
  ReplayBuffer replay(4);
  replay.push(transition(rng, 1, 2.5, true));
  const auto batch = make_batch<float>(replay, {0}, ObservationGrid::kCells);
  const double q = net.forward(batch.observations)(1, 0);
  const double diff = q - 2.5;
  const double huber = std::abs(diff) <= 1.0 ? 0.5 * diff * diff : std::abs(diff) - 0.5;
  CHECK(td_loss(net, target, batch, 0.997) == doctest::Approx(huber).epsilon(1e-5));
  // Very different target networks do not matter for terminal targets.
  target.initialize(99);
  CHECK(td_loss(net, target, batch, 0.997) == doctest::Approx(huber).epsilon(1e-5));
}

TEST_CASE("repeated updates on one transition shrink the loss") {
  QNetwork<float> net, target;
  net.initialize(7);
  sync_target(net, target);
  irl::Rng rng(6);
  ReplayBuffer replay(2);
  replay.push(transition(rng, 2, 3.0, false));
  const auto batch = make_batch<float>(replay, {0}, ObservationGrid::kCells);
  // Adam's momentum oscillates around the optimum once it is reached, so the
  // loss must fall monotonically on the approach, until it is below 1e-3.
  Adam<float> adam(1e-4, 0.9, 0.999, 1e-8);
  double prev = update(net, target, batch, 0.9, adam);
  int iterations = 0;
  while (prev >= 1e-3 && iterations < 150) {
    const double l = update(net, target, batch, 0.9, adam);
    CHECK(l < prev);
    prev = l;
    ++iterations;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("target sync") {
  QNetwork<float> net, target;
  net.initialize(8);
  target.initialize(9);
  irl::Rng rng(7);
  QNetwork<float>::Matrix x(ObservationGrid::kCells, 1);
  PackedObservation(random_grid(rng)).write_to(x.data());
  sync_target(net, target);
  CHECK(net.forward(x) == target.forward(x));
  sync_target(net, target);
  CHECK(net.parameters() == target.parameters());

  ReplayBuffer replay(2);
  replay.push(transition(rng, 0, 1.0, true));
  const auto batch = make_batch<float>(replay, {0}, ObservationGrid::kCells);
  Adam<float> adam;
  update(net, target, batch, 0.997, adam);
  CHECK_FALSE(net.forward(x) == target.forward(x));

  QNetwork<float> small(toy_shape());
  CHECK_THROWS_AS(sync_target(net, small), AgentError);
}

TEST_CASE("replay ring keeps the newest transitions") {
  const std::size_t capacity = 5;
  ReplayBuffer replay(capacity);
  irl::Rng rng(10);
  for (int i = 0; i < 8; ++i) replay.push(transition(rng, 0, static_cast<double>(i), false));
  CHECK(replay.size() == capacity);
  CHECK(replay.inserted() == 8);
  for (std::size_t i = 0; i < capacity; ++i) CHECK(replay.at(i).reward == static_cast<double>(3 + i));
  CHECK_THROWS_AS(replay.at(capacity), AgentError);
  CHECK_THROWS_AS(replay.sample_indices(6, rng), AgentError);
  for (auto i : replay.sample_indices(32 > capacity ? capacity : 32, rng)) CHECK(i < capacity);
  CHECK_THROWS_AS(ReplayBuffer(0), AgentError);
}

TEST_CASE("checkpoint round trip and corrupt files") {
  QNetwork<float> net;
  net.initialize(11);
  const auto path = temp_file("ckpt.bin");
  save_checkpoint(path, net, 4, 1234);
  CheckpointHeader header;
  const auto back = load_checkpoint(path, &header);
  CHECK(back.parameters() == net.parameters());
  CHECK(header.tag == 4);
  CHECK(header.steps == 1234);
  CHECK(header.shape == net.shape());

  const auto bytes = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, bytes - 3);
  CHECK_THROWS_AS(load_checkpoint(path), AgentError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE and more bytes";
  }
  CHECK_THROWS_AS(load_checkpoint(path), AgentError);
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.bin")), AgentError);
  save_checkpoint(path, net, 4, 1);
  {
    std::ofstream os(path, std::ios::binary | std::ios::app);
    os << 'x';
  }
  CHECK_THROWS_AS(load_checkpoint(path), AgentError);
}

TEST_CASE("agent runs are reproducible from the master seed") {
  AgentConfig config;
  config.learning_starts = 4;
  config.batch_size = 4;
  config.target_sync = 3;
  auto run = [&] {
    DqnAgent agent(config, NetworkShape{}, 21);
    irl::Rng data(3);
    std::vector<int> actions;
    for (int i = 0; i < 12; ++i) {
      const auto obs = random_grid(data);
      const int a = agent.act(obs, 0.5);
      actions.push_back(a);
      agent.remember({PackedObservation(obs), a, data.uniform(-1, 1), PackedObservation(random_grid(data)), false});
      agent.on_env_step();
    }
    return std::pair{actions, agent.online().parameters()};
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  DqnAgent other(config, NetworkShape{}, 22);
  CHECK_FALSE(other.online().parameters() == DqnAgent(config, NetworkShape{}, 21).online().parameters());
}
