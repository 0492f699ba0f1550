#pragma once

#include <functional>
#include <span>
#include <vector>

#include "perspective/tensor.hpp"

namespace perspective::ad {

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const;
  const std::vector<int>& shape() const { return value().shape(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Records operations for reverse-mode differentiation. Nodes are appended in
/// evaluation order, so replaying them backwards is a valid topological order.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  /// With recording off no backward closures are stored (inference mode).
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  /// A differentiable input; its gradient is available after backward().
  Var<T> leaf(Tensor<T> value);

  /// Appends an op result. `parents` decide whether the node needs a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward);

  const Tensor<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor<T>& value(Var<T> v) const { return value(v.id); }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool needs_grad(Var<T> v) const { return needs_grad(v.id); }

  /// Gradient slot, allocated as zeros on first access.
  Tensor<T>& grad(int id);
  Tensor<T>& grad(Var<T> v) { return grad(v.id); }
  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

  /// Seeds d(out)/d(out) = 1 for a single-element `out` and propagates.
  void backward(Var<T> out);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(id);
}

enum class Activation { Linear, Relu, Tanh, Sigmoid };
enum class Padding { Valid, Same };

const char* to_string(Activation a);
const char* to_string(Padding p);
Activation parse_activation(const std::string& s);
Padding parse_padding(const std::string& s);

// Rank-2 ops take [rows x cols] operands; rows are batch entries.

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// x [m x n] + bias [n] broadcast over rows.
template <typename T> Var<T> add_bias(Var<T> x, Var<T> bias);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> tanh(Var<T> x);
template <typename T> Var<T> activate(Var<T> x, Activation a);
template <typename T> Var<T> concat_cols(Var<T> a, Var<T> b);
template <typename T> Var<T> slice_cols(Var<T> x, int begin, int count);
/// Rows [begin, begin + count).
template <typename T> Var<T> slice_rows(Var<T> x, int begin, int count);
/// Same data, new shape.
template <typename T> Var<T> reshape(Var<T> x, std::vector<int> shape);

/// x [B x C x H x W], kernels [F x C x K x K], bias [F]; stride 1.
template <typename T> Var<T> conv2d(Var<T> x, Var<T> kernels, Var<T> bias, Padding padding);

/// Q = V + (A - max_a A) per row. value [m x 1], advantage [m x n]. The max
/// picks the lowest index on ties, and the gradient flows through that entry.
template <typename T> Var<T> dueling(Var<T> value, Var<T> advantage);

/// out[i] = x[i, index[i]]; output shape [m].
template <typename T> Var<T> gather_cols(Var<T> x, std::span<const int> index);

/// Scalar sum_i weight[i] * (pred[i] - target[i])^2; target and weight are constants.
template <typename T>
Var<T> weighted_squared_error(Var<T> pred, std::span<const T> target, std::span<const T> weight);

/// Mean over rows of -log softmax(logits)[label]. Stable for large logits.
template <typename T> Var<T> softmax_cross_entropy(Var<T> logits, std::span<const int> labels);

/// Sum of all elements, as a single-element tensor.
template <typename T> Var<T> sum(Var<T> x);

}  // namespace perspective::ad
