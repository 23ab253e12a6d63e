#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyr/tensor.hpp"

namespace lyr {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sigmoid,
  Tanh,
  Relu,
  Clamp,
  Min,
  Max,
  StepLe,       // 1 where lhs <= rhs else 0; gradient-free
  AssertUnit,   // identity; forward checks values lie in [0,1] within 1e-9
  Matmul,
  Softmax,
  ReduceSum,
  ReduceMean,
  ReduceMax,
  Concat,
  Slice,
  Reshape,
  Broadcast,
};

const char* op_name(Op op);

/// Gradients of one backward pass, keyed by parameter id.
/// Parameters never touched by the graph are implicitly zero.
class GradientTape {
 public:
  void accumulate(const std::string& param, const Tensor& g);
  const Tensor* find(const std::string& param) const;
  Tensor get_or_zero(const std::string& param, const Shape& shape) const;
  const std::map<std::string, Tensor>& all() const { return grads_; }

 private:
  std::map<std::string, Tensor> grads_;
};

/// Append-only computational graph over dense float64 tensors with
/// reverse-mode differentiation. Node inputs always precede the node,
/// so insertion order is a topological order. Shapes are inferred and
/// validated when a node is created; values are produced by forward().
///
/// A Graph is single-threaded; disjoint graphs may run in parallel.
class Graph {
 public:
  // -- leaves --------------------------------------------------------------
  NodeId constant(Tensor value);
  NodeId scalar(double v) { return constant(Tensor::scalar(v)); }
  /// Learnable leaf. `param` is the stable parameter id gradients key on.
  NodeId variable(const std::string& param, Tensor snapshot);

  // -- elementwise binary (broadcasting) -----------------------------------
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId min(NodeId a, NodeId b);   // tie routes gradient to the first input
  NodeId max(NodeId a, NodeId b);   // tie routes gradient to the first input
  NodeId step_le(NodeId a, NodeId b);

  // -- elementwise unary ----------------------------------------------------
  NodeId neg(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId assert_unit(NodeId a, const std::string& label);

  // -- shape & structure ----------------------------------------------------
  NodeId matmul(NodeId a, NodeId b);                 // strictly 2-D
  NodeId softmax(NodeId a, int axis);
  NodeId reduce_sum(NodeId a, int axis);
  NodeId reduce_mean(NodeId a, int axis);
  NodeId reduce_max(NodeId a, int axis);             // ties: lowest index wins
  NodeId concat(const std::vector<NodeId>& parts, int axis);
  NodeId slice(NodeId a, int axis, std::size_t index);  // drops the axis
  NodeId reshape(NodeId a, Shape target);
  NodeId broadcast(NodeId a, Shape target);

  // -- execution -------------------------------------------------------------
  /// Evaluate every node the requested outputs depend on, once each.
  void forward(std::span<const NodeId> outputs);
  void forward(NodeId output) { forward(std::span<const NodeId>(&output, 1)); }
  const Tensor& value(NodeId id) const;

  /// Reverse-mode pass from a scalar output (shape [] or [1]); forward()
  /// must already cover it. Returns d(output)/d(param) for every variable
  /// leaf reachable from the output.
  GradientTape backward(NodeId output);

  const Shape& shape(NodeId id) const { return node(id).shape; }
  std::size_t size() const { return nodes_.size(); }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }

 private:
  struct Node {
    Op op;
    Shape shape;
    std::vector<NodeId> inputs;
    Tensor val;
    bool evaluated = false;
    bool requires_grad = false;
    std::string tag;   // parameter id for Variable, label for AssertUnit
    int axis = 0;
    std::size_t index = 0;
    double lo = 0.0, hi = 0.0;
  };

  const Node& node(NodeId id) const;
  Node& node(NodeId id);
  NodeId push(Node n);
  NodeId binary(Op op, NodeId a, NodeId b);
  NodeId unary(Op op, NodeId a);
  NodeId reduce(Op op, NodeId a, int axis);
  void eval(NodeId id);
  void check_axis(const Shape& s, int axis, const char* what) const;
  std::string describe(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace lyr
