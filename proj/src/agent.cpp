#include "irl/agent.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace irl::agent {

namespace {

constexpr std::size_t kWords = (world::ObservationGrid::kCells + 63) / 64;

void require(bool ok, const std::string& what) {
  if (!ok) throw AgentError(what);
}

}  // namespace

void AgentConfig::validate() const {
  require(replay_capacity >= 1, "agent.replay_capacity must be at least 1");
  require(batch_size >= 1, "agent.batch_size must be at least 1");
  require(static_cast<std::size_t>(batch_size) <= replay_capacity, "agent.batch_size exceeds agent.replay_capacity");
  require(discount >= 0.0 && discount <= 1.0, "agent.discount must lie in [0, 1]");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "agent.learning_rate must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "agent.epsilon_start must lie in [0, 1]");
  require(epsilon_end >= 0.0 && epsilon_end <= 1.0, "agent.epsilon_end must lie in [0, 1]");
  require(epsilon_fraction >= 0.0 && epsilon_fraction <= 1.0, "agent.epsilon_fraction must lie in [0, 1]");
  require(target_sync >= 1, "agent.target_sync must be at least 1");
  require(train_every >= 1, "agent.train_every must be at least 1");
  require(learning_starts >= 0, "agent.learning_starts must be non-negative");
  require(huber_delta > 0.0, "agent.huber_delta must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "agent.adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "agent.adam_beta2 must lie in [0, 1)");
  require(adam_epsilon > 0.0, "agent.adam_epsilon must be positive");
}

double epsilon_at(const AgentConfig& config, std::uint64_t step, std::uint64_t total_steps) {
  const double horizon = config.epsilon_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0) return config.epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(step) / horizon);
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

PackedObservation::PackedObservation(const world::ObservationGrid& grid) : bits_(kWords, 0) {
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (grid.cells[i] > 0.5f) bits_[i / 64] |= std::uint64_t{1} << (i % 64);
  }
}

world::ObservationGrid PackedObservation::unpack() const {
  world::ObservationGrid grid;
  write_to(grid.cells.data());
  return grid;
}

template <typename T>
void PackedObservation::write_to(T* column) const {
  if (bits_.empty()) throw AgentError("empty observation");
  for (std::size_t i = 0; i < static_cast<std::size_t>(world::ObservationGrid::kCells); ++i) {
    column[i] = ((bits_[i / 64] >> (i % 64)) & 1U) != 0 ? T(1) : T(0);
  }
}

template void PackedObservation::write_to<float>(float*) const;
template void PackedObservation::write_to<double>(double*) const;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw AgentError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
  ++inserted_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw AgentError("replay index out of range");
  return data_.size() < capacity_ ? data_[i] : data_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (data_.size() < count || count == 0) throw AgentError("not enough transitions to sample a batch");
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_index(data_.size()));
  return out;
}

void ReplayBuffer::clear() {
  data_.clear();
  head_ = 0;
  inserted_ = 0;
}

template <typename T>
Batch<T> make_batch(const ReplayBuffer& replay, const std::vector<std::size_t>& indices, int input_dim) {
  if (input_dim != world::ObservationGrid::kCells) throw AgentError("network input does not match the observation size");
  Batch<T> b;
  const auto n = static_cast<Eigen::Index>(indices.size());
  b.observations.resize(input_dim, n);
  b.next_observations.resize(input_dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = replay.at(indices[static_cast<std::size_t>(j)]);
    t.observation.write_to(b.observations.col(j).data());
    t.next_observation.write_to(b.next_observations.col(j).data());
    b.actions.push_back(t.action);
    b.rewards.push_back(t.reward);
    b.terminals.push_back(t.terminal);
  }
  return b;
}

template <typename T>
void Adam<T>::step(typename QNetwork<T>::Vector& params, const typename QNetwork<T>::Vector& grad) {
  if (m_.size() != params.size()) {
    m_ = QNetwork<T>::Vector::Zero(params.size());
    v_ = QNetwork<T>::Vector::Zero(params.size());
    t_ = 0;
  }
  ++t_;
  const T b1 = static_cast<T>(b1_), b2 = static_cast<T>(b2_);
  m_ = b1 * m_ + (T(1) - b1) * grad;
  v_ = b2 * v_ + (T(1) - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const T step = static_cast<T>(lr_ * std::sqrt(c2) / c1);
  const T eps = static_cast<T>(eps_ * std::sqrt(c2));
  params.array() -= step * m_.array() / (v_.array().sqrt() + eps);
}

template <typename T>
int argmax_action(const typename QNetwork<T>::Matrix& q, Eigen::Index column) {
  int best = 0;
  for (Eigen::Index a = 1; a < q.rows(); ++a) {
    if (q(a, column) > q(best, column)) best = static_cast<int>(a);
  }
  return best;
}

template <typename T>
int act(const QNetwork<T>& net, const world::ObservationGrid& obs, double epsilon, Rng& rng) {
  const int n = net.shape().actions;
  if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
  typename QNetwork<T>::Matrix input(net.shape().input_dim(), 1);
  std::copy(obs.cells.begin(), obs.cells.end(), input.data());
  return argmax_action<T>(net.forward(input));
}

namespace {

template <typename T>
std::vector<double> td_targets(const QNetwork<T>& target, const Batch<T>& batch, double discount) {
  if (batch.size() == 0) throw AgentError("empty batch");
  const auto next_q = target.forward(batch.next_observations);
  std::vector<double> y(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double bootstrap = batch.terminals[j] ? 0.0 : static_cast<double>(next_q.col(static_cast<Eigen::Index>(j)).maxCoeff());
    y[j] = batch.rewards[j] + discount * bootstrap;
  }
  return y;
}

double huber(double e, double delta) {
  const double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

template <typename T>
void check_actions(const QNetwork<T>& net, const Batch<T>& batch) {
  for (int a : batch.actions) {
    if (a < 0 || a >= net.shape().actions) throw AgentError("batch action out of range");
  }
}

}  // namespace

template <typename T>
double td_loss(const QNetwork<T>& net, const QNetwork<T>& target, const Batch<T>& batch, double discount,
               double huber_delta) {
  check_actions(net, batch);
  const std::vector<double> y = td_targets(target, batch, discount);
  const auto q = net.forward(batch.observations);
  double loss = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    loss += huber(static_cast<double>(q(batch.actions[j], static_cast<Eigen::Index>(j))) - y[j], huber_delta);
  }
  return loss / static_cast<double>(batch.size());
}

template <typename T>
double update(QNetwork<T>& net, const QNetwork<T>& target, const Batch<T>& batch, double discount, Adam<T>& optimizer,
              double huber_delta) {
  check_actions(net, batch);
  const std::vector<double> y = td_targets(target, batch, discount);
  const auto n = static_cast<double>(batch.size());
  double loss = 0.0;
  using Matrix = typename QNetwork<T>::Matrix;
  const auto grad = net.gradient(batch.observations, [&](const Matrix& q) {
    Matrix dq = Matrix::Zero(q.rows(), q.cols());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const double e = static_cast<double>(q(batch.actions[j], col)) - y[j];
      loss += huber(e, huber_delta);
      dq(batch.actions[j], col) = static_cast<T>(std::clamp(e, -huber_delta, huber_delta) / n);
    }
    return dq;
  });
  loss /= n;
  if (!std::isfinite(loss) || !grad.allFinite()) throw DivergenceError("non-finite loss during update");
  optimizer.step(net.parameters(), grad);
  return loss;
}

template <typename T>
void sync_target(const QNetwork<T>& net, QNetwork<T>& target) {
  if (!(net.shape() == target.shape())) throw AgentError("target network shape differs from online network");
  target.parameters() = net.parameters();
}

#define IRL_INSTANTIATE(T)                                                                             \
  template Batch<T> make_batch<T>(const ReplayBuffer&, const std::vector<std::size_t>&, int);          \
  template class Adam<T>;                                                                              \
  template int argmax_action<T>(const QNetwork<T>::Matrix&, Eigen::Index);                             \
  template int act<T>(const QNetwork<T>&, const world::ObservationGrid&, double, Rng&);                \
  template double td_loss<T>(const QNetwork<T>&, const QNetwork<T>&, const Batch<T>&, double, double); \
  template double update<T>(QNetwork<T>&, const QNetwork<T>&, const Batch<T>&, double, Adam<T>&, double); \
  template void sync_target<T>(const QNetwork<T>&, QNetwork<T>&);
IRL_INSTANTIATE(float)
IRL_INSTANTIATE(double)
#undef IRL_INSTANTIATE

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFFU);
  os.write(b.data(), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xFFFFFFFFULL));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw AgentError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  return lo | (static_cast<std::uint64_t>(get_u32(is)) << 32);
}

std::array<int*, 10> shape_fields(NetworkShape& s) {
  return {&s.in_channels,  &s.in_size,       &s.conv1_filters, &s.conv1_kernel, &s.conv1_stride,
          &s.conv2_filters, &s.conv2_kernel, &s.conv2_stride,  &s.hidden,       &s.actions};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const QNetwork<float>& net, std::uint32_t tag,
                     std::uint64_t steps) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw AgentError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, tag);
  NetworkShape shape = net.shape();
  for (int* f : shape_fields(shape)) put_u32(os, static_cast<std::uint32_t>(*f));
  put_u64(os, steps);
  const auto& p = net.parameters();
  put_u64(os, static_cast<std::uint64_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) put_u32(os, std::bit_cast<std::uint32_t>(p[i]));
  if (!os) throw AgentError("failed writing checkpoint " + path.string());
}

QNetwork<float> load_checkpoint(const std::filesystem::path& path, CheckpointHeader* header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw AgentError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw AgentError(path.string() + " is not a checkpoint file");
  }
  CheckpointHeader h;
  h.version = get_u32(is);
  if (h.version != kCheckpointVersion) {
    throw AgentError("unsupported checkpoint version " + std::to_string(h.version));
  }
  h.tag = get_u32(is);
  for (int* f : shape_fields(h.shape)) *f = static_cast<int>(get_u32(is));
  h.steps = get_u64(is);
  try {
    h.shape.validate();
  } catch (const NetworkError& e) {
    throw AgentError("checkpoint has an invalid network shape: " + std::string(e.what()));
  }
  QNetwork<float> net(h.shape);
  const std::uint64_t count = get_u64(is);
  if (count != static_cast<std::uint64_t>(net.parameters().size())) {
    throw AgentError("checkpoint parameter count does not match its shape");
  }
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) {
    net.parameters()[i] = std::bit_cast<float>(get_u32(is));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw AgentError("trailing bytes in checkpoint");
  if (header != nullptr) *header = h;
  return net;
}

DqnAgent::DqnAgent(const AgentConfig& config, const NetworkShape& shape, std::uint64_t master_seed)
    : config_(config),
      online_(shape),
      target_(shape),
      optimizer_(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon),
      replay_(config.replay_capacity),
      explore_rng_(derive_seed(master_seed, "epsilon")),
      replay_rng_(derive_seed(master_seed, "replay")) {
  config_.validate();
  online_.initialize(derive_seed(master_seed, "network"));
  sync_target(online_, target_);
}

int DqnAgent::act(const world::ObservationGrid& obs, double epsilon) {
  return agent::act(online_, obs, epsilon, explore_rng_);
}

int DqnAgent::greedy(const world::ObservationGrid& obs) const {
  QNetwork<float>::Matrix input(online_.shape().input_dim(), 1);
  std::copy(obs.cells.begin(), obs.cells.end(), input.data());
  return argmax_action<float>(online_.forward(input));
}

std::optional<double> DqnAgent::on_env_step() {
  ++env_steps_;
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  if (env_steps_ < static_cast<std::uint64_t>(config_.learning_starts) || replay_.size() < batch ||
      env_steps_ % static_cast<std::uint64_t>(config_.train_every) != 0) {
    return std::nullopt;
  }
  const auto indices = replay_.sample_indices(batch, replay_rng_);
  const auto b = make_batch<float>(replay_, indices, online_.shape().input_dim());
  const double loss = update(online_, target_, b, config_.discount, optimizer_, config_.huber_delta);
  ++updates_;
  if (updates_ % static_cast<std::uint64_t>(config_.target_sync) == 0) sync_target(online_, target_);
  return loss;
}

void DqnAgent::load_parameters(const QNetwork<float>& net, std::uint64_t env_steps) {
  if (!(net.shape() == online_.shape())) throw AgentError("checkpoint shape does not match the configured network");
  online_.parameters() = net.parameters();
  sync_target(online_, target_);
  env_steps_ = env_steps;
}

}  // namespace irl::agent
