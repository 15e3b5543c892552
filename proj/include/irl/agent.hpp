#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "irl/environment.hpp"
#include "irl/network.hpp"
#include "irl/rng.hpp"

namespace irl::agent {

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a loss goes NaN or infinite; the run is expected to abort.
class DivergenceError : public AgentError {
 public:
  using AgentError::AgentError;
};

struct AgentConfig {
  std::size_t replay_capacity = 50000;
  int batch_size = 32;
  double discount = 0.997;
  double learning_rate = 3e-4;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_fraction = 0.25;  // of total steps
  int target_sync = 500;           // in updates
  int train_every = 1;             // env steps per update
  int learning_starts = 500;       // env steps before the first update
  double huber_delta = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

/// Linear decay from epsilon_start to epsilon_end over the first
/// epsilon_fraction of total_steps, constant afterwards.
double epsilon_at(const AgentConfig& config, std::uint64_t step, std::uint64_t total_steps);

/// Observations are binary rasters, stored one bit per cell.
class PackedObservation {
 public:
  PackedObservation() = default;
  explicit PackedObservation(const world::ObservationGrid& grid);
  world::ObservationGrid unpack() const;
  template <typename T>
  void write_to(T* column) const;
  friend bool operator==(const PackedObservation&, const PackedObservation&) = default;

 private:
  std::vector<std::uint64_t> bits_;
};

struct Transition {
  PackedObservation observation;
  int action = 0;
  double reward = 0.0;
  PackedObservation next_observation;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  /// i-th oldest transition still held.
  const Transition& at(std::size_t i) const;
  /// Uniform with replacement. Requires size() >= count.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  void clear();

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;
  std::uint64_t inserted_ = 0;
};

template <typename T>
struct Batch {
  typename QNetwork<T>::Matrix observations;       // input_dim x n
  typename QNetwork<T>::Matrix next_observations;  // input_dim x n
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<bool> terminals;
  std::size_t size() const { return actions.size(); }
};

template <typename T>
Batch<T> make_batch(const ReplayBuffer& replay, const std::vector<std::size_t>& indices, int input_dim);

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double epsilon) : lr_(lr), b1_(beta1), b2_(beta2), eps_(epsilon) {}
  void step(typename QNetwork<T>::Vector& params, const typename QNetwork<T>::Vector& grad);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t steps() const { return t_; }

 private:
  double lr_ = 3e-4, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  typename QNetwork<T>::Vector m_, v_;
  std::uint64_t t_ = 0;
};

/// Greedy index, lowest index on ties.
template <typename T>
int argmax_action(const typename QNetwork<T>::Matrix& q, Eigen::Index column = 0);

/// Epsilon-greedy. One uniform draw decides exploration; a second draw,
/// taken only when exploring, picks the action.
template <typename T>
int act(const QNetwork<T>& net, const world::ObservationGrid& obs, double epsilon, Rng& rng);

/// Mean Huber loss between Q(s,a) and r + gamma * (1 - terminal) * max Q_target(s',a').
template <typename T>
double td_loss(const QNetwork<T>& net, const QNetwork<T>& target, const Batch<T>& batch, double discount,
               double huber_delta = 1.0);

/// One Adam step on td_loss. Returns the loss before the step.
template <typename T>
double update(QNetwork<T>& net, const QNetwork<T>& target, const Batch<T>& batch, double discount, Adam<T>& optimizer,
              double huber_delta = 1.0);

template <typename T>
void sync_target(const QNetwork<T>& net, QNetwork<T>& target);

struct CheckpointHeader {
  std::uint32_t version = 1;
  std::uint32_t tag = 0;  // owner-defined, e.g. the ablation code
  NetworkShape shape;
  std::uint64_t steps = 0;
};

inline constexpr char kCheckpointMagic[4] = {'I', 'R', 'L', 'Q'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const QNetwork<float>& net, std::uint32_t tag,
                     std::uint64_t steps);
/// Loads into a network of the stored shape.
QNetwork<float> load_checkpoint(const std::filesystem::path& path, CheckpointHeader* header = nullptr);

/// Online network, target network, optimizer and replay for one run.
class DqnAgent {
 public:
  DqnAgent(const AgentConfig& config, const NetworkShape& shape, std::uint64_t master_seed);

  int act(const world::ObservationGrid& obs, double epsilon);
  int greedy(const world::ObservationGrid& obs) const;

  void remember(Transition t) { replay_.push(std::move(t)); }
  /// Counts one env step and trains per schedule. Returns the loss when an
  /// update ran.
  std::optional<double> on_env_step();

  const QNetwork<float>& online() const { return online_; }
  QNetwork<float>& online() { return online_; }
  const QNetwork<float>& target() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  const AgentConfig& config() const { return config_; }
  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t updates() const { return updates_; }
  /// Replace both networks, e.g. from a checkpoint.
  void load_parameters(const QNetwork<float>& net, std::uint64_t env_steps);

 private:
  AgentConfig config_;
  QNetwork<float> online_;
  QNetwork<float> target_;
  Adam<float> optimizer_;
  ReplayBuffer replay_;
  Rng explore_rng_;
  Rng replay_rng_;
  std::uint64_t env_steps_ = 0;
  std::uint64_t updates_ = 0;
};

}  // namespace irl::agent
