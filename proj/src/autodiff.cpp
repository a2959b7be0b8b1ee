#include "sincvae/autodiff.hpp"

#include "sincvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sincvae::ad {

const Tensor& Var::value() const {
  require(graph != nullptr, ErrorCode::kState, "value() on an unbound Var");
  return graph->value(*this);
}

int Graph::check(Var v) const {
  require(v.graph == this && v.id >= 0 && static_cast<size_t>(v.id) < nodes_.size(),
          ErrorCode::kState, "Var does not belong to this graph");
  return v.id;
}

Var Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::parameter(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.is_parameter = true;
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                  BackwardFn backward) {
  require(!backward_done_, ErrorCode::kState,
          std::string(op) + ": graph already consumed by backward");
  if (!value.all_finite()) {
    fail(ErrorCode::kNonFinite, std::string(op) + ": non-finite forward value");
  }
  bool needs_grad = false;
  for (Var in : inputs) needs_grad = needs_grad || nodes_[static_cast<size_t>(check(in))].requires_grad;
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor Graph::grad(Var v) const {
  const Node& node = nodes_.at(static_cast<size_t>(check(v)));
  if (node.has_grad) return node.grad;
  return Tensor::zeros(node.value.shape());
}

Tensor& Graph::grad_buffer(int id) {
  Node& node = nodes_[static_cast<size_t>(id)];
  if (!node.has_grad) {
    node.grad = Tensor::zeros(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

void Graph::backward(Var loss) {
  const int root = check(loss);
  require(!backward_done_, ErrorCode::kState,
          "backward called twice on the same graph; rebuild the forward pass");
  require(nodes_[static_cast<size_t>(root)].value.size() == 1, ErrorCode::kShapeMismatch,
          "backward requires a scalar loss, got shape " +
              shape_string(nodes_[static_cast<size_t>(root)].value.shape()));
  backward_done_ = true;
  if (!nodes_[static_cast<size_t>(root)].requires_grad) return;
  grad_buffer(root).data().setOnes();
  for (int id = root; id >= 0; --id) {
    Node& node = nodes_[static_cast<size_t>(id)];
    if (node.has_grad && node.backward) node.backward(*this, id);
  }
}

namespace {

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": shape mismatch " +
                                        shape_string(a.shape()) + " vs " +
                                        shape_string(b.shape()));
  }
}

void require_rank(std::string_view op, const Tensor& t, Index rank, const char* what) {
  if (t.rank() != rank) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + what + " must have rank " +
                                        std::to_string(rank) + ", got " +
                                        shape_string(t.shape()));
  }
}

Graph& graph_of(Var a) {
  require(a.graph != nullptr, ErrorCode::kState, "op on an unbound Var");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  require(a.graph != nullptr && a.graph == b.graph, ErrorCode::kState,
          "op on Vars from different graphs");
  return *a.graph;
}

// Floor/ceil division valid for negative numerators and positive divisors.
Index floor_div(Index a, Index b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
Index ceil_div(Index a, Index b) { return -floor_div(-a, b); }

template <typename Forward, typename Derivative>
Var unary(std::string_view op, Var a, Forward f, Derivative df) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  y.data() = x.data().unaryExpr(f);
  const int ia = a.id;
  return g.record(op, std::move(y), {a}, [ia, df](Graph& g, int self) {
    const Eigen::VectorXd& gy = g.upstream(self).data();
    const Eigen::VectorXd& xv = g.value(ia).data();
    const Eigen::VectorXd& yv = g.value(self).data();
    Eigen::VectorXd& gx = g.grad_buffer(ia).data();
    for (Index i = 0; i < gy.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

ConvGeometry conv_geometry(Index in_length, Index kernel, const Conv1dOptions& opts) {
  require(opts.stride >= 1, ErrorCode::kInvalidArgument, "conv stride must be >= 1");
  require(kernel >= 1, ErrorCode::kInvalidArgument, "conv kernel must be >= 1");
  ConvGeometry geom;
  if (opts.padding == Padding::kValid) {
    require(in_length >= kernel, ErrorCode::kShapeMismatch,
            "conv1d(valid): input length " + std::to_string(in_length) +
                " shorter than kernel " + std::to_string(kernel));
    geom.out_length = (in_length - kernel) / opts.stride + 1;
    geom.pad_left = 0;
  } else {
    geom.out_length = (in_length + opts.stride - 1) / opts.stride;
    const Index total =
        std::max<Index>((geom.out_length - 1) * opts.stride + kernel - in_length, 0);
    geom.pad_left = total / 2;
  }
  return geom;
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor y(a.shape(), a.value().data() + b.value().data());
  const int ia = a.id, ib = b.id;
  return g.record("add", std::move(y), {a, b}, [ia, ib](Graph& g, int self) {
    const Eigen::VectorXd& gy = g.upstream(self).data();
    if (g.requires_grad(ia)) g.grad_buffer(ia).data() += gy;
    if (g.requires_grad(ib)) g.grad_buffer(ib).data() += gy;
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor y(a.shape(), a.value().data() - b.value().data());
  const int ia = a.id, ib = b.id;
  return g.record("sub", std::move(y), {a, b}, [ia, ib](Graph& g, int self) {
    const Eigen::VectorXd& gy = g.upstream(self).data();
    if (g.requires_grad(ia)) g.grad_buffer(ia).data() += gy;
    if (g.requires_grad(ib)) g.grad_buffer(ib).data() -= gy;
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor y(a.shape(), a.value().data().cwiseProduct(b.value().data()));
  const int ia = a.id, ib = b.id;
  return g.record("mul", std::move(y), {a, b}, [ia, ib](Graph& g, int self) {
    const Eigen::VectorXd& gy = g.upstream(self).data();
    if (g.requires_grad(ia)) {
      g.grad_buffer(ia).data() += gy.cwiseProduct(g.value(ib).data());
    }
    if (g.requires_grad(ib)) {
      g.grad_buffer(ib).data() += gy.cwiseProduct(g.value(ia).data());
    }
  });
}

Var scale(Var a, double factor) {
  Graph& g = graph_of(a);
  Tensor y(a.shape(), a.value().data() * factor);
  const int ia = a.id;
  return g.record("scale", std::move(y), {a}, [ia, factor](Graph& g, int self) {
    g.grad_buffer(ia).data() += factor * g.upstream(self).data();
  });
}

Var add_scalar(Var a, double offset) {
  Graph& g = graph_of(a);
  Tensor y(a.shape(), a.value().data().array() + offset);
  const int ia = a.id;
  return g.record("add_scalar", std::move(y), {a}, [ia](Graph& g, int self) {
    g.grad_buffer(ia).data() += g.upstream(self).data();
  });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var log(Var a) {
  require(a.value().data().minCoeff() > 0.0, ErrorCode::kInvalidArgument,
          "log: input must be strictly positive");
  return unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  Tensor y = Tensor::scalar(a.value().data().sum());
  const int ia = a.id;
  return g.record("sum", std::move(y), {a}, [ia](Graph& g, int self) {
    g.grad_buffer(ia).data().array() += g.upstream(self).item();
  });
}

Var mean(Var a) {
  const Index n = a.value().size();
  require(n > 0, ErrorCode::kInvalidArgument, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var reshape(Var a, Shape shape) {
  Graph& g = graph_of(a);
  Tensor y = a.value().reshaped(std::move(shape));
  const int ia = a.id;
  return g.record("reshape", std::move(y), {a}, [ia](Graph& g, int self) {
    g.grad_buffer(ia).data() += g.upstream(self).data();
  });
}

namespace {

struct AxisSplit {
  Index outer = 1;
  Index extent = 1;
  Index inner = 1;
};

AxisSplit split_at(const Shape& shape, Index axis) {
  AxisSplit s;
  for (Index i = 0; i < static_cast<Index>(shape.size()); ++i) {
    if (i < axis) s.outer *= shape[static_cast<size_t>(i)];
    else if (i == axis) s.extent = shape[static_cast<size_t>(i)];
    else s.inner *= shape[static_cast<size_t>(i)];
  }
  return s;
}

}  // namespace

Var slice(Var a, Index axis, Index start, Index length) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require(axis >= 0 && axis < x.rank(), ErrorCode::kShapeMismatch,
          "slice: axis " + std::to_string(axis) + " out of range for " +
              shape_string(x.shape()));
  require(start >= 0 && length >= 0 && start + length <= x.dim(axis),
          ErrorCode::kShapeMismatch,
          "slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
              ") exceeds axis of " + shape_string(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[static_cast<size_t>(axis)] = length;
  Tensor y(out_shape);
  for (Index o = 0; o < s.outer; ++o) {
    y.data().segment(o * length * s.inner, length * s.inner) =
        x.data().segment((o * s.extent + start) * s.inner, length * s.inner);
  }
  const int ia = a.id;
  return g.record("slice", std::move(y), {a}, [ia, s, start, length](Graph& g, int self) {
    const Eigen::VectorXd& gy = g.upstream(self).data();
    Eigen::VectorXd& gx = g.grad_buffer(ia).data();
    for (Index o = 0; o < s.outer; ++o) {
      gx.segment((o * s.extent + start) * s.inner, length * s.inner) +=
          gy.segment(o * length * s.inner, length * s.inner);
    }
  });
}

Var concat(std::span<const Var> parts, Index axis) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat of zero tensors");
  Graph& g = graph_of(parts.front());
  const Shape& first = parts.front().shape();
  require(axis >= 0 && axis < static_cast<Index>(first.size()), ErrorCode::kShapeMismatch,
          "concat: axis out of range for " + shape_string(first));
  Index total = 0;
  for (Var p : parts) {
    Shape a = p.shape(), b = first;
    a[static_cast<size_t>(axis)] = b[static_cast<size_t>(axis)] = 0;
    if (a != b || p.graph != &g) {
      fail(ErrorCode::kShapeMismatch, "concat: shape mismatch " + shape_string(first) +
                                          " vs " + shape_string(p.shape()));
    }
    total += p.shape()[static_cast<size_t>(axis)];
  }
  Shape out_shape = first;
  out_shape[static_cast<size_t>(axis)] = total;
  const AxisSplit s = split_at(out_shape, axis);
  Tensor y(out_shape);
  std::vector<int> ids;
  std::vector<Index> offsets;
  Index offset = 0;
  for (Var p : parts) {
    const Index ext = p.shape()[static_cast<size_t>(axis)];
    for (Index o = 0; o < s.outer; ++o) {
      y.data().segment((o * total + offset) * s.inner, ext * s.inner) =
          p.value().data().segment(o * ext * s.inner, ext * s.inner);
    }
    ids.push_back(p.id);
    offsets.push_back(offset);
    offset += ext;
  }
  return g.record("concat", std::move(y), parts, [ids, offsets, s, total](Graph& g, int self) {
    const Eigen::VectorXd& gy = g.upstream(self).data();
    for (size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) continue;
      Eigen::VectorXd& gx = g.grad_buffer(ids[k]).data();
      const Index ext = gx.size() / (s.outer * s.inner);
      for (Index o = 0; o < s.outer; ++o) {
        gx.segment(o * ext * s.inner, ext * s.inner) +=
            gy.segment((o * total + offsets[k]) * s.inner, ext * s.inner);
      }
    }
  });
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_rank("matmul", a.value(), 2, "left operand");
  require_rank("matmul", b.value(), 2, "right operand");
  const Index m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  if (b.value().dim(0) != k) {
    fail(ErrorCode::kShapeMismatch, "matmul: shape mismatch " + shape_string(a.shape()) +
                                        " vs " + shape_string(b.shape()));
  }
  Tensor y({m, n});
  y.matrix(m, n).noalias() = a.value().matrix(m, k) * b.value().matrix(k, n);
  const int ia = a.id, ib = b.id;
  return g.record("matmul", std::move(y), {a, b}, [ia, ib, m, k, n](Graph& g, int self) {
    const auto gy = g.upstream(self).matrix(m, n);
    if (g.requires_grad(ia)) {
      g.grad_buffer(ia).matrix(m, k).noalias() += gy * g.value(ib).matrix(k, n).transpose();
    }
    if (g.requires_grad(ib)) {
      g.grad_buffer(ib).matrix(k, n).noalias() += g.value(ia).matrix(m, k).transpose() * gy;
    }
  });
}

Var affine(Var x, Var weight, Var bias) {
  Graph& g = graph_of(x, weight);
  require(bias.graph == &g, ErrorCode::kState, "affine: bias from another graph");
  require_rank("affine", x.value(), 2, "input");
  require_rank("affine", weight.value(), 2, "weight");
  require_rank("affine", bias.value(), 1, "bias");
  const Index n = x.value().dim(0), in = x.value().dim(1), out = weight.value().dim(0);
  if (weight.value().dim(1) != in || bias.value().dim(0) != out) {
    fail(ErrorCode::kShapeMismatch, "affine: shape mismatch input " + shape_string(x.shape()) +
                                        " weight " + shape_string(weight.shape()) +
                                        " bias " + shape_string(bias.shape()));
  }
  Tensor y({n, out});
  auto ym = y.matrix(n, out);
  ym.noalias() = x.value().matrix(n, in) * weight.value().matrix(out, in).transpose();
  ym.rowwise() += bias.value().data().transpose();
  const int ix = x.id, iw = weight.id, ib = bias.id;
  return g.record("affine", std::move(y), {x, weight, bias},
                  [ix, iw, ib, n, in, out](Graph& g, int self) {
                    const auto gy = g.upstream(self).matrix(n, out);
                    if (g.requires_grad(ix)) {
                      g.grad_buffer(ix).matrix(n, in).noalias() +=
                          gy * g.value(iw).matrix(out, in);
                    }
                    if (g.requires_grad(iw)) {
                      g.grad_buffer(iw).matrix(out, in).noalias() +=
                          gy.transpose() * g.value(ix).matrix(n, in);
                    }
                    if (g.requires_grad(ib)) {
                      g.grad_buffer(ib).data() += gy.colwise().sum().transpose();
                    }
                  });
}

namespace {

// Valid output range [t0, t1] for kernel tap k so that the input index
// t*stride + k - pad lies in [0, in_length).
struct TapRange {
  Index first;
  Index last;
};

TapRange tap_range(Index k, Index pad_left, Index stride, Index in_length, Index out_length) {
  const Index first = std::max<Index>(0, ceil_div(pad_left - k, stride));
  const Index last = std::min<Index>(out_length - 1, floor_div(in_length - 1 + pad_left - k, stride));
  return {first, last};
}

}  // namespace

Var conv1d(Var x, Var weight, Var bias, const Conv1dOptions& opts) {
  Graph& g = graph_of(x, weight);
  require(bias.graph == &g, ErrorCode::kState, "conv1d: bias from another graph");
  require_rank("conv1d", x.value(), 3, "input");
  require_rank("conv1d", weight.value(), 3, "weight");
  require_rank("conv1d", bias.value(), 1, "bias");
  const Index n = x.value().dim(0), cin = x.value().dim(1), len = x.value().dim(2);
  const Index cout = weight.value().dim(0), ksize = weight.value().dim(2);
  if (weight.value().dim(1) != cin || bias.value().dim(0) != cout) {
    fail(ErrorCode::kShapeMismatch, "conv1d: shape mismatch input " + shape_string(x.shape()) +
                                        " weight " + shape_string(weight.shape()) +
                                        " bias " + shape_string(bias.shape()));
  }
  const ConvGeometry geom = conv_geometry(len, ksize, opts);
  const Index olen = geom.out_length, pad = geom.pad_left, stride = opts.stride;
  Tensor y({n, cout, olen});
  const double* xp = x.value().ptr();
  const double* wp = weight.value().ptr();
  const double* bp = bias.value().ptr();
  double* yp = y.ptr();
  for (Index b = 0; b < n; ++b) {
    for (Index co = 0; co < cout; ++co) {
      double* yrow = yp + (b * cout + co) * olen;
      std::fill(yrow, yrow + olen, bp[co]);
      for (Index ci = 0; ci < cin; ++ci) {
        const double* xrow = xp + (b * cin + ci) * len;
        const double* wrow = wp + (co * cin + ci) * ksize;
        for (Index k = 0; k < ksize; ++k) {
          const double wk = wrow[k];
          const TapRange r = tap_range(k, pad, stride, len, olen);
          const double* src = xrow + k - pad;
          for (Index t = r.first; t <= r.last; ++t) yrow[t] += wk * src[t * stride];
        }
      }
    }
  }
  const int ix = x.id, iw = weight.id, ib = bias.id;
  return g.record(
      "conv1d", std::move(y), {x, weight, bias},
      [=](Graph& g, int self) {
        const double* gy = g.upstream(self).ptr();
        const double* xp = g.value(ix).ptr();
        const double* wp = g.value(iw).ptr();
        double* gx = g.requires_grad(ix) ? g.grad_buffer(ix).ptr() : nullptr;
        double* gw = g.requires_grad(iw) ? g.grad_buffer(iw).ptr() : nullptr;
        double* gb = g.requires_grad(ib) ? g.grad_buffer(ib).ptr() : nullptr;
        for (Index b = 0; b < n; ++b) {
          for (Index co = 0; co < cout; ++co) {
            const double* grow = gy + (b * cout + co) * olen;
            if (gb) {
              double acc = 0.0;
              for (Index t = 0; t < olen; ++t) acc += grow[t];
              gb[co] += acc;
            }
            for (Index ci = 0; ci < cin; ++ci) {
              const double* xrow = xp + (b * cin + ci) * len;
              const double* wrow = wp + (co * cin + ci) * ksize;
              double* gxrow = gx ? gx + (b * cin + ci) * len : nullptr;
              double* gwrow = gw ? gw + (co * cin + ci) * ksize : nullptr;
              for (Index k = 0; k < ksize; ++k) {
                const TapRange r = tap_range(k, pad, stride, len, olen);
                const Index shift = k - pad;
                if (gwrow) {
                  double acc = 0.0;
                  for (Index t = r.first; t <= r.last; ++t) acc += grow[t] * xrow[t * stride + shift];
                  gwrow[k] += acc;
                }
                if (gxrow) {
                  const double wk = wrow[k];
                  for (Index t = r.first; t <= r.last; ++t) gxrow[t * stride + shift] += wk * grow[t];
                }
              }
            }
          }
        }
      });
}

Var depthwise_conv1d(Var x, Var kernels, Padding padding) {
  Graph& g = graph_of(x, kernels);
  require_rank("depthwise_conv1d", x.value(), 3, "input");
  require_rank("depthwise_conv1d", kernels.value(), 2, "kernels");
  const Index n = x.value().dim(0), chans = x.value().dim(1), len = x.value().dim(2);
  const Index nk = kernels.value().dim(0), ksize = kernels.value().dim(1);
  require(len >= ksize, ErrorCode::kShapeMismatch,
          "depthwise_conv1d: window length " + std::to_string(len) +
              " shorter than kernel length " + std::to_string(ksize));
  const ConvGeometry geom = conv_geometry(len, ksize, {1, padding});
  const Index olen = geom.out_length, pad = geom.pad_left;
  const Index cout = chans * nk;
  Tensor y({n, cout, olen});
  const double* xp = x.value().ptr();
  const double* kp = kernels.value().ptr();
  double* yp = y.ptr();
  for (Index b = 0; b < n; ++b) {
    for (Index c = 0; c < chans; ++c) {
      const double* xrow = xp + (b * chans + c) * len;
      for (Index f = 0; f < nk; ++f) {
        double* yrow = yp + (b * cout + c * nk + f) * olen;
        const double* krow = kp + f * ksize;
        for (Index k = 0; k < ksize; ++k) {
          const double wk = krow[k];
          const TapRange r = tap_range(k, pad, 1, len, olen);
          const double* src = xrow + k - pad;
          for (Index t = r.first; t <= r.last; ++t) yrow[t] += wk * src[t];
        }
      }
    }
  }
  const int ix = x.id, ik = kernels.id;
  return g.record("depthwise_conv1d", std::move(y), {x, kernels}, [=](Graph& g, int self) {
    const double* gy = g.upstream(self).ptr();
    const double* xp = g.value(ix).ptr();
    const double* kp = g.value(ik).ptr();
    double* gx = g.requires_grad(ix) ? g.grad_buffer(ix).ptr() : nullptr;
    double* gk = g.requires_grad(ik) ? g.grad_buffer(ik).ptr() : nullptr;
    for (Index b = 0; b < n; ++b) {
      for (Index c = 0; c < chans; ++c) {
        const double* xrow = xp + (b * chans + c) * len;
        double* gxrow = gx ? gx + (b * chans + c) * len : nullptr;
        for (Index f = 0; f < nk; ++f) {
          const double* grow = gy + (b * cout + c * nk + f) * olen;
          for (Index k = 0; k < ksize; ++k) {
            const TapRange r = tap_range(k, pad, 1, len, olen);
            const Index shift = k - pad;
            if (gk) {
              double acc = 0.0;
              for (Index t = r.first; t <= r.last; ++t) acc += grow[t] * xrow[t + shift];
              gk[f * ksize + k] += acc;
            }
            if (gxrow) {
              const double wk = kp[f * ksize + k];
              for (Index t = r.first; t <= r.last; ++t) gxrow[t + shift] += wk * grow[t];
            }
          }
        }
      }
    }
  });
}

Var upsample_nearest(Var x, Index factor) {
  Graph& g = graph_of(x);
  require(factor >= 1, ErrorCode::kInvalidArgument, "upsample factor must be >= 1");
  require(x.value().rank() >= 1, ErrorCode::kShapeMismatch, "upsample of a scalar");
  const Index len = x.value().dim(x.value().rank() - 1);
  const Index rows = x.value().size() / std::max<Index>(len, 1);
  Shape out_shape = x.shape();
  out_shape.back() = len * factor;
  Tensor y(out_shape);
  const double* xp = x.value().ptr();
  double* yp = y.ptr();
  for (Index r = 0; r < rows; ++r) {
    for (Index t = 0; t < len * factor; ++t) yp[r * len * factor + t] = xp[r * len + t / factor];
  }
  const int ix = x.id;
  return g.record("upsample_nearest", std::move(y), {x}, [=](Graph& g, int self) {
    const double* gy = g.upstream(self).ptr();
    double* gx = g.grad_buffer(ix).ptr();
    for (Index r = 0; r < rows; ++r) {
      for (Index t = 0; t < len * factor; ++t) gx[r * len + t / factor] += gy[r * len * factor + t];
    }
  });
}

Var layer_norm(Var x, double epsilon) {
  Graph& g = graph_of(x);
  require(x.value().rank() >= 1, ErrorCode::kShapeMismatch, "layer_norm of a scalar");
  const Index len = x.value().dim(x.value().rank() - 1);
  require(len >= 1, ErrorCode::kShapeMismatch, "layer_norm over an empty axis");
  const Index rows = x.value().size() / len;
  Tensor y(x.shape());
  Eigen::VectorXd inv_std(rows);
  const auto xm = x.value().matrix(rows, len);
  auto ym = y.matrix(rows, len);
  for (Index r = 0; r < rows; ++r) {
    const double mu = xm.row(r).mean();
    const double var = (xm.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    ym.row(r) = (xm.row(r).array() - mu) * inv_std[r];
  }
  const int ix = x.id;
  return g.record("layer_norm", std::move(y), {x}, [=](Graph& g, int self) {
    const auto gy = g.upstream(self).matrix(rows, len);
    const auto yv = g.value(self).matrix(rows, len);
    auto gx = g.grad_buffer(ix).matrix(rows, len);
    for (Index r = 0; r < rows; ++r) {
      const double mean_g = gy.row(r).mean();
      const double mean_gy = gy.row(r).cwiseProduct(yv.row(r)).mean();
      gx.row(r).array() += inv_std[r] * (gy.row(r).array() - mean_g - yv.row(r).array() * mean_gy);
    }
  });
}

}  // namespace sincvae::ad
