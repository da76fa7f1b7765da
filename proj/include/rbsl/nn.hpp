#pragma once

// Dense feed-forward networks with hand-written reverse mode. Batches are stored
// column-wise: an input batch is (input_dim x N).

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "rbsl/common.hpp"

namespace rbsl {

enum class Activation { Relu, Tanh, Identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct Layer {
  MatrixX<T> w;  ///< (out x in)
  VectorX<T> b;
  Activation act = Activation::Identity;

  bool operator==(const Layer& o) const { return act == o.act && w == o.w && b == o.b; }
};

/// Parameter-shaped accumulator; also used for optimizer moments.
template <typename T>
struct Gradients {
  std::vector<MatrixX<T>> w;
  std::vector<VectorX<T>> b;

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] += o.w[i];
      b[i] += o.b[i];
    }
    return *this;
  }
  Gradients& operator*=(T s) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] *= s;
      b[i] *= s;
    }
    return *this;
  }

  T squared_norm() const {
    T total = 0;
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i].squaredNorm() + b[i].squaredNorm();
    return total;
  }

  /// Layer-major flattening: W (column-major) then b for each layer.
  VectorX<T> flatten() const {
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < w.size(); ++i) n += w[i].size() + b[i].size();
    VectorX<T> out(n);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      out.segment(k, w[i].size()) = Eigen::Map<const VectorX<T>>(w[i].data(), w[i].size());
      k += w[i].size();
      out.segment(k, b[i].size()) = b[i];
      k += b[i].size();
    }
    return out;
  }
};

template <typename T>
class Mlp {
 public:
  /// Intermediate values kept for the backward pass.
  struct Tape {
    std::vector<MatrixX<T>> inputs;  ///< input to each layer
    std::vector<MatrixX<T>> outputs;  ///< post-activation output of each layer
  };

  Mlp() = default;

  explicit Mlp(std::vector<Layer<T>> layers) : layers_(std::move(layers)) { check_shapes(); }

  /// sizes = {in, hidden..., out}; weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(const std::vector<int>& sizes, Activation hidden, Activation output, Rng& rng) {
    if (sizes.size() < 2) throw ShapeError("Mlp needs at least input and output sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int in = sizes[i];
      const int out = sizes[i + 1];
      if (in < 1 || out < 1) throw ShapeError("Mlp layer sizes must be positive");
      const T bound = T(1) / std::sqrt(static_cast<T>(in));
      std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
      Layer<T> layer;
      layer.w.resize(out, in);
      layer.b.resize(out);
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.w.rows(); ++r) layer.w(r, c) = static_cast<T>(dist(rng));
      for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b(r) = static_cast<T>(dist(rng));
      layer.act = i + 2 == sizes.size() ? output : hidden;
      layers_.push_back(std::move(layer));
    }
  }

  int input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().w.cols()); }
  int output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().w.rows()); }
  std::size_t num_layers() const { return layers_.size(); }

  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<Layer<T>>& layers() { return layers_; }

  MatrixX<T> forward(const MatrixX<T>& x) const {
    check_input(x.rows());
    MatrixX<T> a = x;
    for (const auto& layer : layers_) {
      MatrixX<T> z = layer.w * a;
      z.colwise() += layer.b;
      apply_activation(layer.act, z);
      a = std::move(z);
    }
    return a;
  }

  VectorX<T> forward(const VectorX<T>& x) const { return forward(MatrixX<T>(x)).col(0); }

  MatrixX<T> forward(const MatrixX<T>& x, Tape& tape) const {
    check_input(x.rows());
    tape.inputs.clear();
    tape.outputs.clear();
    tape.inputs.reserve(layers_.size());
    tape.outputs.reserve(layers_.size());
    const MatrixX<T>* a = &x;
    for (const auto& layer : layers_) {
      tape.inputs.push_back(*a);
      MatrixX<T> z = layer.w * (*a);
      z.colwise() += layer.b;
      apply_activation(layer.act, z);
      tape.outputs.push_back(std::move(z));
      a = &tape.outputs.back();
    }
    return tape.outputs.back();
  }

  /// Back-propagates dL/d(output). Accumulates parameter gradients into `grads` when
  /// non-null and returns dL/d(input).
  MatrixX<T> backward(const Tape& tape, const MatrixX<T>& d_out, Gradients<T>* grads) const {
    if (grads && grads->w.size() != layers_.size()) *grads = zero_gradients();
    MatrixX<T> d = d_out;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& layer = layers_[k];
      const MatrixX<T>& y = tape.outputs[k];
      switch (layer.act) {
        case Activation::Relu: d = d.cwiseProduct((y.array() > T(0)).template cast<T>().matrix()); break;
        case Activation::Tanh: d = d.cwiseProduct((T(1) - y.array().square()).matrix()); break;
        case Activation::Identity: break;
      }
      if (grads) {
        grads->w[k].noalias() += d * tape.inputs[k].transpose();
        grads->b[k] += d.rowwise().sum();
      }
      d = layer.w.transpose() * d;
    }
    return d;
  }

  Gradients<T> zero_gradients() const {
    Gradients<T> g;
    for (const auto& layer : layers_) {
      g.w.push_back(MatrixX<T>::Zero(layer.w.rows(), layer.w.cols()));
      g.b.push_back(VectorX<T>::Zero(layer.b.size()));
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& layer : layers_)
      if (!layer.w.allFinite() || !layer.b.allFinite()) return false;
    return true;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& layer : layers_) n += layer.w.size() + layer.b.size();
    return n;
  }

  /// Mutable access to the i-th parameter in Gradients::flatten order.
  T& parameter(Eigen::Index i) {
    for (auto& layer : layers_) {
      if (i < layer.w.size()) return layer.w.data()[i];
      i -= layer.w.size();
      if (i < layer.b.size()) return layer.b.data()[i];
      i -= layer.b.size();
    }
    throw ShapeError("parameter index out of range");
  }

  bool same_shape(const Mlp& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].w.rows() != o.layers_[i].w.rows() || layers_[i].w.cols() != o.layers_[i].w.cols()) return false;
    return true;
  }

  bool operator==(const Mlp& o) const { return layers_ == o.layers_; }

 private:
  static void apply_activation(Activation act, MatrixX<T>& z) {
    switch (act) {
      case Activation::Relu: z = z.cwiseMax(T(0)); break;
      case Activation::Tanh: z = z.array().tanh().matrix(); break;
      case Activation::Identity: break;
    }
  }

  void check_input(Eigen::Index rows) const {
    if (layers_.empty()) throw ShapeError("forward on an empty network");
    if (rows != layers_.front().w.cols())
      throw ShapeError("input has " + std::to_string(rows) + " rows, network expects " +
                       std::to_string(layers_.front().w.cols()));
  }

  void check_shapes() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].b.size() != layers_[i].w.rows()) throw ShapeError("bias size does not match weight rows");
      if (i > 0 && layers_[i].w.cols() != layers_[i - 1].w.rows())
        throw ShapeError("layer " + std::to_string(i) + " does not compose with its predecessor");
    }
  }

  std::vector<Layer<T>> layers_;
};

using Network = Mlp<double>;
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Mean batch loss and its derivative with respect to the network output.
template <typename T>
struct LossAndGrad {
  T value = 0;
  MatrixX<T> d_output;
};

template <typename T>
struct GradResult {
  T loss = 0;
  Gradients<T> grads;
};

/// Reverse-mode gradient of `loss_fn(net(x))` with respect to every parameter.
template <typename T, typename LossFn>
GradResult<T> grad(const Mlp<T>& net, const MatrixX<T>& x, LossFn&& loss_fn, std::int64_t batch_index = 0) {
  typename Mlp<T>::Tape tape;
  const MatrixX<T> out = net.forward(x, tape);
  LossAndGrad<T> l = loss_fn(out);
  if (!std::isfinite(static_cast<double>(l.value))) throw NonFiniteError(batch_index, "loss");
  if (l.d_output.rows() != out.rows() || l.d_output.cols() != out.cols())
    throw ShapeError("loss gradient shape does not match network output");
  GradResult<T> r;
  r.loss = l.value;
  r.grads = net.zero_gradients();
  net.backward(tape, l.d_output, &r.grads);
  return r;
}

/// Mean squared error over all output entries, averaged per sample: mean_i (y_i - t_i)^2.
template <typename T>
LossAndGrad<T> mean_squared_error(const MatrixX<T>& y, const MatrixX<T>& target) {
  const T n = static_cast<T>(y.cols());
  const MatrixX<T> diff = y - target;
  return {diff.squaredNorm() / n, (T(2) / n) * diff};
}

}  // namespace rbsl
