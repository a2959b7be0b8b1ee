#pragma once

#include "sincvae/tensor.hpp"

#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace sincvae::ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Define-by-run tape for reverse-mode differentiation. Nodes are appended in
// execution order, which is already a topological order, so backward walks
// the tape in reverse. A graph is built for one forward pass and supports a
// single backward pass.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf whose gradient is collected by backward().
  Var parameter(Tensor value);

  // Appends an op node. `backward` is only kept when some input needs a
  // gradient. Rejects non-finite forward values, naming the op.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(check(v)).value; }
  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(int id) const {
    return nodes_[static_cast<size_t>(id)].requires_grad;
  }

  // Gradient of the last backward's loss with respect to `v`; zeros when
  // `v` was not reached.
  Tensor grad(Var v) const;

  // Upstream gradient of node `id` during backward.
  const Tensor& upstream(int id) const {
    return nodes_[static_cast<size_t>(id)].grad;
  }
  // Zero-initialized accumulation buffer for node `id`.
  Tensor& grad_buffer(int id);

  void backward(Var loss);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    bool is_parameter = false;
    BackwardFn backward;
  };

  int check(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

enum class Padding { kValid, kSame };

struct Conv1dOptions {
  Index stride = 1;
  Padding padding = Padding::kSame;
};

// Left padding and output length of a 1-D convolution. `same` pads so that
// out = ceil(in / stride), splitting the padding evenly with any odd sample
// on the right.
struct ConvGeometry {
  Index out_length = 0;
  Index pad_left = 0;
};
ConvGeometry conv_geometry(Index in_length, Index kernel, const Conv1dOptions& opts);

// Elementwise
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var relu(Var a);
Var tanh(Var a);
inline Var identity(Var a) { return a; }

// Reductions to a scalar.
Var sum(Var a);
Var mean(Var a);

// Structure
Var reshape(Var a, Shape shape);
Var slice(Var a, Index axis, Index start, Index length);
Var concat(std::span<const Var> parts, Index axis);

// Linear maps
Var matmul(Var a, Var b);                 // [m,k] x [k,n]
Var affine(Var x, Var weight, Var bias);  // [n,in] -> [n,out], weight [out,in]

// x [n, c_in, t], weight [c_out, c_in, k], bias [c_out]. Cross-correlation.
Var conv1d(Var x, Var weight, Var bias, const Conv1dOptions& opts = {});
// Applies every kernel of `kernels` [f, k] to every channel of x [n, c, t]
// with stride 1. Output [n, c * f, t_out]; channel c*f + j holds kernel j
// over input channel c.
Var depthwise_conv1d(Var x, Var kernels, Padding padding = Padding::kSame);
// Nearest-neighbour repeat along the last axis.
Var upsample_nearest(Var x, Index factor);
// Zero-mean, unit-variance normalization along the last axis.
Var layer_norm(Var x, double epsilon = 1e-5);

}  // namespace sincvae::ad
