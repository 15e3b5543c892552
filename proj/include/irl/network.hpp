#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace irl::agent {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two valid (unpadded) strided convolutions, then two dense layers. ReLU
/// after every layer but the last.
struct NetworkShape {
  int in_channels = 3;
  int in_size = 64;
  int conv1_filters = 8;
  int conv1_kernel = 4;
  int conv1_stride = 4;
  int conv2_filters = 16;
  int conv2_kernel = 3;
  int conv2_stride = 2;
  int hidden = 64;
  int actions = 3;

  int conv1_out() const { return (in_size - conv1_kernel) / conv1_stride + 1; }
  int conv2_out() const { return (conv1_out() - conv2_kernel) / conv2_stride + 1; }
  int input_dim() const { return in_channels * in_size * in_size; }
  int flat_dim() const { return conv2_filters * conv2_out() * conv2_out(); }
  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Q-value network with parameters in one contiguous vector, ordered
/// conv1.W, conv1.b, conv2.W, conv2.b, fc1.W, fc1.b, fc2.W, fc2.b (weights
/// row-major, output unit major).
template <typename T>
class QNetwork {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  QNetwork() : QNetwork(NetworkShape{}) {}
  explicit QNetwork(const NetworkShape& shape);

  /// He-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  const NetworkShape& shape() const { return shape_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  /// inputs: input_dim x batch, one sample per column. Returns actions x batch.
  Matrix forward(const Matrix& inputs) const;

  /// Forward pass that keeps activations, then back-propagates dL/dQ
  /// (actions x batch). Returns dL/dparams in parameter order.
  Vector gradient(const Matrix& inputs, const Matrix& dq, Matrix* q_out = nullptr) const;
  /// Same, with dL/dQ computed from the forward output in one pass.
  Vector gradient(const Matrix& inputs, const std::function<Matrix(const Matrix& q)>& dq_of_q) const;

  struct BlockInfo {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<BlockInfo> blocks() const;

 private:
  struct Cache;
  void run(const Matrix& inputs, Cache& cache) const;

  NetworkShape shape_;
  Vector params_;
  std::size_t off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_, off_w4_, off_b4_;
};

extern template class QNetwork<float>;
extern template class QNetwork<double>;

}  // namespace irl::agent
