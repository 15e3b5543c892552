#include "irl/network.hpp"

#include <cmath>

#include "irl/rng.hpp"

namespace irl::agent {

std::size_t NetworkShape::parameter_count() const {
  const auto c1 = static_cast<std::size_t>(conv1_filters);
  const auto c2 = static_cast<std::size_t>(conv2_filters);
  const auto k1 = static_cast<std::size_t>(in_channels * conv1_kernel * conv1_kernel);
  const auto k2 = static_cast<std::size_t>(conv1_filters * conv2_kernel * conv2_kernel);
  const auto h = static_cast<std::size_t>(hidden);
  const auto a = static_cast<std::size_t>(actions);
  return c1 * k1 + c1 + c2 * k2 + c2 + h * static_cast<std::size_t>(flat_dim()) + h + a * h + a;
}

void NetworkShape::validate() const {
  if (in_channels < 1 || in_size < 1 || conv1_filters < 1 || conv2_filters < 1 || hidden < 1 || actions < 1) {
    throw NetworkError("network dimensions must be positive");
  }
  if (conv1_kernel < 1 || conv1_stride < 1 || conv2_kernel < 1 || conv2_stride < 1) {
    throw NetworkError("kernel sizes and strides must be positive");
  }
  if (conv1_kernel > in_size || conv2_kernel > conv1_out()) {
    throw NetworkError("convolution kernel larger than its input");
  }
}

template <typename T>
struct QNetwork<T>::Cache {
  Matrix cols1, a1, cols2, a2, flat, h, q;
};

namespace {

template <typename T>
using RowMajorMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using VecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using VecMutMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

// Column layout of a feature map: sample-major, then row, then column.
// Input rows of `src` address (channel, y, x) through `at`.
template <typename Mat, typename At>
void im2col(Mat& cols, int channels, int kernel, int stride, int out, int batch, At at) {
  const int positions = out * out;
  cols.resize(channels * kernel * kernel, batch * positions);
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const int col = b * positions + oy * out + ox;
        int row = 0;
        for (int ch = 0; ch < channels; ++ch) {
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              cols(row++, col) = at(b, ch, oy * stride + ky, ox * stride + kx);
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
QNetwork<T>::QNetwork(const NetworkShape& shape) : shape_(shape) {
  shape_.validate();
  const auto& s = shape_;
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  off_w1_ = take(static_cast<std::size_t>(s.conv1_filters * s.in_channels * s.conv1_kernel * s.conv1_kernel));
  off_b1_ = take(static_cast<std::size_t>(s.conv1_filters));
  off_w2_ = take(static_cast<std::size_t>(s.conv2_filters * s.conv1_filters * s.conv2_kernel * s.conv2_kernel));
  off_b2_ = take(static_cast<std::size_t>(s.conv2_filters));
  off_w3_ = take(static_cast<std::size_t>(s.hidden * s.flat_dim()));
  off_b3_ = take(static_cast<std::size_t>(s.hidden));
  off_w4_ = take(static_cast<std::size_t>(s.actions * s.hidden));
  off_b4_ = take(static_cast<std::size_t>(s.actions));
  params_ = Vector::Zero(static_cast<Eigen::Index>(off));
}

template <typename T>
std::vector<typename QNetwork<T>::BlockInfo> QNetwork<T>::blocks() const {
  const auto total = static_cast<std::size_t>(params_.size());
  return {{"conv1.weight", off_w1_, off_b1_ - off_w1_}, {"conv1.bias", off_b1_, off_w2_ - off_b1_},
          {"conv2.weight", off_w2_, off_b2_ - off_w2_}, {"conv2.bias", off_b2_, off_w3_ - off_b2_},
          {"fc1.weight", off_w3_, off_b3_ - off_w3_},   {"fc1.bias", off_b3_, off_w4_ - off_b3_},
          {"fc2.weight", off_w4_, off_b4_ - off_w4_},   {"fc2.bias", off_b4_, total - off_b4_}};
}

template <typename T>
void QNetwork<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  params_.setZero();
  const auto& s = shape_;
  auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < count; ++i) params_[static_cast<Eigen::Index>(offset + i)] = static_cast<T>(rng.uniform(-limit, limit));
  };
  fill(off_w1_, off_b1_ - off_w1_, s.in_channels * s.conv1_kernel * s.conv1_kernel);
  fill(off_w2_, off_b2_ - off_w2_, s.conv1_filters * s.conv2_kernel * s.conv2_kernel);
  fill(off_w3_, off_b3_ - off_w3_, s.flat_dim());
  // Output layer starts small so early Q estimates stay near zero.
  const double limit = std::sqrt(6.0 / s.hidden) * 0.1;
  for (std::size_t i = off_w4_; i < off_b4_; ++i) params_[static_cast<Eigen::Index>(i)] = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void QNetwork<T>::run(const Matrix& inputs, Cache& c) const {
  const auto& s = shape_;
  if (inputs.rows() != s.input_dim()) {
    throw NetworkError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                       std::to_string(s.input_dim()));
  }
  const int batch = static_cast<int>(inputs.cols());
  const int o1 = s.conv1_out(), o2 = s.conv2_out();
  const int p1 = o1 * o1, p2 = o2 * o2;
  const T* p = params_.data();

  const int size = s.in_size;
  im2col(c.cols1, s.in_channels, s.conv1_kernel, s.conv1_stride, o1, batch,
         [&](int b, int ch, int y, int x) { return inputs((ch * size + y) * size + x, b); });
  const RowMajorMap<T> w1(p + off_w1_, s.conv1_filters, s.in_channels * s.conv1_kernel * s.conv1_kernel);
  const VecMap<T> b1(p + off_b1_, s.conv1_filters);
  c.a1 = ((w1 * c.cols1).colwise() + b1).cwiseMax(T(0));

  im2col(c.cols2, s.conv1_filters, s.conv2_kernel, s.conv2_stride, o2, batch,
         [&](int b, int ch, int y, int x) { return c.a1(ch, b * p1 + y * o1 + x); });
  const RowMajorMap<T> w2(p + off_w2_, s.conv2_filters, s.conv1_filters * s.conv2_kernel * s.conv2_kernel);
  const VecMap<T> b2(p + off_b2_, s.conv2_filters);
  c.a2 = ((w2 * c.cols2).colwise() + b2).cwiseMax(T(0));

  c.flat.resize(s.flat_dim(), batch);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < s.conv2_filters; ++ch) {
      c.flat.col(b).segment(ch * p2, p2) = c.a2.row(ch).segment(b * p2, p2).transpose();
    }
  }
  const RowMajorMap<T> w3(p + off_w3_, s.hidden, s.flat_dim());
  const VecMap<T> b3(p + off_b3_, s.hidden);
  c.h = ((w3 * c.flat).colwise() + b3).cwiseMax(T(0));

  const RowMajorMap<T> w4(p + off_w4_, s.actions, s.hidden);
  const VecMap<T> b4(p + off_b4_, s.actions);
  c.q = (w4 * c.h).colwise() + b4;
}

template <typename T>
typename QNetwork<T>::Matrix QNetwork<T>::forward(const Matrix& inputs) const {
  Cache c;
  run(inputs, c);
  return std::move(c.q);
}

template <typename T>
typename QNetwork<T>::Vector QNetwork<T>::gradient(const Matrix& inputs, const Matrix& dq, Matrix* q_out) const {
  return gradient(inputs, [&](const Matrix& q) {
    if (q_out != nullptr) *q_out = q;
    return dq;
  });
}

template <typename T>
typename QNetwork<T>::Vector QNetwork<T>::gradient(const Matrix& inputs,
                                                   const std::function<Matrix(const Matrix& q)>& dq_of_q) const {
  Cache c;
  run(inputs, c);
  const Matrix dq = dq_of_q(c.q);
  if (dq.rows() != c.q.rows() || dq.cols() != c.q.cols()) throw NetworkError("dQ shape mismatch");

  const auto& s = shape_;
  const int batch = static_cast<int>(inputs.cols());
  const int o1 = s.conv1_out(), o2 = s.conv2_out();
  const int p1 = o1 * o1, p2 = o2 * o2;
  const T* p = params_.data();
  Vector grad = Vector::Zero(params_.size());
  T* g = grad.data();

  const RowMajorMap<T> w4(p + off_w4_, s.actions, s.hidden);
  RowMajorMutMap<T>(g + off_w4_, s.actions, s.hidden) = dq * c.h.transpose();
  VecMutMap<T>(g + off_b4_, s.actions) = dq.rowwise().sum();
  const Matrix dh = (w4.transpose() * dq).cwiseProduct((c.h.array() > T(0)).matrix().template cast<T>());

  const RowMajorMap<T> w3(p + off_w3_, s.hidden, s.flat_dim());
  RowMajorMutMap<T>(g + off_w3_, s.hidden, s.flat_dim()) = dh * c.flat.transpose();
  VecMutMap<T>(g + off_b3_, s.hidden) = dh.rowwise().sum();
  const Matrix dflat = w3.transpose() * dh;

  Matrix da2(s.conv2_filters, batch * p2);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < s.conv2_filters; ++ch) {
      da2.row(ch).segment(b * p2, p2) = dflat.col(b).segment(ch * p2, p2).transpose();
    }
  }
  da2 = da2.cwiseProduct((c.a2.array() > T(0)).matrix().template cast<T>());
  const int k2 = s.conv1_filters * s.conv2_kernel * s.conv2_kernel;
  const RowMajorMap<T> w2(p + off_w2_, s.conv2_filters, k2);
  RowMajorMutMap<T>(g + off_w2_, s.conv2_filters, k2) = da2 * c.cols2.transpose();
  VecMutMap<T>(g + off_b2_, s.conv2_filters) = da2.rowwise().sum();
  const Matrix dcols2 = w2.transpose() * da2;

  Matrix da1 = Matrix::Zero(s.conv1_filters, batch * p1);
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < o2; ++oy) {
      for (int ox = 0; ox < o2; ++ox) {
        const int col = b * p2 + oy * o2 + ox;
        int row = 0;
        for (int ch = 0; ch < s.conv1_filters; ++ch) {
          for (int ky = 0; ky < s.conv2_kernel; ++ky) {
            for (int kx = 0; kx < s.conv2_kernel; ++kx) {
              const int y = oy * s.conv2_stride + ky, x = ox * s.conv2_stride + kx;
              da1(ch, b * p1 + y * o1 + x) += dcols2(row++, col);
            }
          }
        }
      }
    }
  }
  da1 = da1.cwiseProduct((c.a1.array() > T(0)).matrix().template cast<T>());
  const int k1 = s.in_channels * s.conv1_kernel * s.conv1_kernel;
  RowMajorMutMap<T>(g + off_w1_, s.conv1_filters, k1) = da1 * c.cols1.transpose();
  VecMutMap<T>(g + off_b1_, s.conv1_filters) = da1.rowwise().sum();
  return grad;
}

template class QNetwork<float>;
template class QNetwork<double>;

}  // namespace irl::agent
