#include "lyr/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace lyr {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Shape of `s` right-aligned against rank `r`, padded with leading ones.
Shape pad_left(const Shape& s, std::size_t r) {
  Shape out(r, 1);
  std::copy(s.begin(), s.end(), out.begin() + (r - s.size()));
  return out;
}

bool broadcastable(const Shape& from, const Shape& to) {
  if (from.size() > to.size()) return false;
  Shape f = pad_left(from, to.size());
  for (std::size_t i = 0; i < to.size(); ++i)
    if (f[i] != to[i] && f[i] != 1) return false;
  return true;
}

std::optional<Shape> common_shape(const Shape& a, const Shape& b) {
  std::size_t r = std::max(a.size(), b.size());
  Shape pa = pad_left(a, r), pb = pad_left(b, r), out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i]) out[i] = pa[i];
    else if (pa[i] == 1) out[i] = pb[i];
    else if (pb[i] == 1) out[i] = pa[i];
    else return std::nullopt;
  }
  return out;
}

// Copy src (shape ss, already padded to the rank of ts) into dst of shape ts,
// replicating broadcast axes. Uses memcpy block doubling on replicated axes.
void broadcast_copy(const double* src, double* dst, const std::size_t* ss,
                    const std::size_t* ts, std::size_t rank) {
  if (rank == 0) {
    *dst = *src;
    return;
  }
  bool tail_equal = true;
  std::size_t block = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (ss[i] != ts[i]) tail_equal = false;
    block *= ts[i];
  }
  if (tail_equal) {
    std::memcpy(dst, src, block * sizeof(double));
    return;
  }
  std::size_t tblock = block / ts[0];
  std::size_t sblock = 1;
  for (std::size_t i = 1; i < rank; ++i) sblock *= ss[i];
  if (ss[0] == ts[0]) {
    for (std::size_t i = 0; i < ts[0]; ++i)
      broadcast_copy(src + i * sblock, dst + i * tblock, ss + 1, ts + 1, rank - 1);
  } else {  // ss[0] == 1
    broadcast_copy(src, dst, ss + 1, ts + 1, rank - 1);
    for (std::size_t i = 1; i < ts[0]; ++i)
      std::memcpy(dst + i * tblock, dst, tblock * sizeof(double));
  }
}

// Accumulate grad g of shape ts into acc of (padded) shape ss, summing over
// the axes that were replicated by broadcast_copy.
void broadcast_reduce(const double* g, double* acc, const std::size_t* ss,
                      const std::size_t* ts, std::size_t rank) {
  if (rank == 0) {
    *acc += *g;
    return;
  }
  bool tail_equal = true;
  std::size_t block = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (ss[i] != ts[i]) tail_equal = false;
    block *= ts[i];
  }
  if (tail_equal) {
    for (std::size_t i = 0; i < block; ++i) acc[i] += g[i];
    return;
  }
  std::size_t tblock = block / ts[0];
  std::size_t sblock = 1;
  for (std::size_t i = 1; i < rank; ++i) sblock *= ss[i];
  if (ss[0] == ts[0]) {
    for (std::size_t i = 0; i < ts[0]; ++i)
      broadcast_reduce(g + i * tblock, acc + i * sblock, ss + 1, ts + 1, rank - 1);
  } else {
    for (std::size_t i = 0; i < ts[0]; ++i)
      broadcast_reduce(g + i * tblock, acc, ss + 1, ts + 1, rank - 1);
  }
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit out;
  for (int i = 0; i < axis; ++i) out.outer *= s[i];
  out.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Variable: return "variable";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Clamp: return "clamp";
    case Op::Min: return "min";
    case Op::Max: return "max";
    case Op::StepLe: return "step_le";
    case Op::AssertUnit: return "assert_unit";
    case Op::Matmul: return "matmul";
    case Op::Softmax: return "softmax";
    case Op::ReduceSum: return "reduce_sum";
    case Op::ReduceMean: return "reduce_mean";
    case Op::ReduceMax: return "reduce_max";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Reshape: return "reshape";
    case Op::Broadcast: return "broadcast";
  }
  return "?";
}

void GradientTape::accumulate(const std::string& param, const Tensor& g) {
  auto it = grads_.find(param);
  if (it == grads_.end()) {
    grads_.emplace(param, g);
    return;
  }
  if (!same_shape(it->second.shape, g.shape))
    throw Error("tape: conflicting gradient shapes for parameter '" + param + "'");
  for (std::size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
}

const Tensor* GradientTape::find(const std::string& param) const {
  auto it = grads_.find(param);
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor GradientTape::get_or_zero(const std::string& param, const Shape& shape) const {
  if (const Tensor* t = find(param)) {
    if (!same_shape(t->shape, shape))
      throw Error("tape: gradient shape mismatch for parameter '" + param + "'");
    return *t;
  }
  return Tensor::zeros(shape);
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) throw Error("graph: invalid node id " + std::to_string(id));
  return nodes_[id];
}

Graph::Node& Graph::node(NodeId id) {
  if (id >= nodes_.size()) throw Error("graph: invalid node id " + std::to_string(id));
  return nodes_[id];
}

std::string Graph::describe(NodeId id) const {
  const Node& n = nodes_[id];
  std::string s = std::string(op_name(n.op)) + "#" + std::to_string(id);
  if (!n.tag.empty()) s += "('" + n.tag + "')";
  return s;
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs)
    if (node(in).requires_grad) n.requires_grad = true;
  if (n.op == Op::Variable) n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.shape = value.shape;
  n.val = std::move(value);
  n.evaluated = true;
  return push(std::move(n));
}

NodeId Graph::variable(const std::string& param, Tensor snapshot) {
  if (param.empty()) throw Error("graph: variable needs a parameter id");
  Node n;
  n.op = Op::Variable;
  n.shape = snapshot.shape;
  n.val = std::move(snapshot);
  n.evaluated = true;
  n.tag = param;
  return push(std::move(n));
}

void Graph::check_axis(const Shape& s, int axis, const char* what) const {
  if (axis < 0 || static_cast<std::size_t>(axis) >= s.size())
    throw Error(std::string(what) + ": axis " + std::to_string(axis) +
                " out of range for shape " + shape_str(s));
}

NodeId Graph::binary(Op op, NodeId a, NodeId b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  Shape out;
  if (same_shape(sa, sb) || numel(sb) == 1) {
    out = numel(sa) == 1 && sb.size() > sa.size() ? sb : sa;
  } else if (numel(sa) == 1) {
    out = sb;
  } else {
    auto common = common_shape(sa, sb);
    if (!common)
      throw Error(std::string(op_name(op)) + ": incompatible broadcast " + shape_str(sa) +
                  " vs " + shape_str(sb) + " (inputs " + describe(a) + ", " + describe(b) + ")");
    // Materialize broadcasts so the kernels only see equal or scalar operands.
    if (!same_shape(sa, *common)) a = broadcast(a, *common);
    if (!same_shape(sb, *common)) b = broadcast(b, *common);
    out = *common;
  }
  Node n;
  n.op = op;
  n.shape = std::move(out);
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::unary(Op op, NodeId a) {
  Node n;
  n.op = op;
  n.shape = node(a).shape;
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return binary(Op::Add, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary(Op::Sub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary(Op::Mul, a, b); }
NodeId Graph::div(NodeId a, NodeId b) { return binary(Op::Div, a, b); }
NodeId Graph::min(NodeId a, NodeId b) { return binary(Op::Min, a, b); }
NodeId Graph::max(NodeId a, NodeId b) { return binary(Op::Max, a, b); }
NodeId Graph::step_le(NodeId a, NodeId b) { return binary(Op::StepLe, a, b); }

NodeId Graph::neg(NodeId a) { return unary(Op::Neg, a); }
NodeId Graph::exp(NodeId a) { return unary(Op::Exp, a); }
NodeId Graph::log(NodeId a) { return unary(Op::Log, a); }
NodeId Graph::sigmoid(NodeId a) { return unary(Op::Sigmoid, a); }
NodeId Graph::tanh(NodeId a) { return unary(Op::Tanh, a); }
NodeId Graph::relu(NodeId a) { return unary(Op::Relu, a); }

NodeId Graph::clamp(NodeId a, double lo, double hi) {
  if (!(lo <= hi)) throw Error("clamp: lo > hi");
  Node n;
  n.op = Op::Clamp;
  n.shape = node(a).shape;
  n.inputs = {a};
  n.lo = lo;
  n.hi = hi;
  return push(std::move(n));
}

NodeId Graph::assert_unit(NodeId a, const std::string& label) {
  Node n;
  n.op = Op::AssertUnit;
  n.shape = node(a).shape;
  n.inputs = {a};
  n.tag = label;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.size() != 2 || sb.size() != 2)
    throw Error("matmul: expects 2-D operands, got " + shape_str(sa) + " and " + shape_str(sb) +
                " (inputs " + describe(a) + ", " + describe(b) + ")");
  if (sa[1] != sb[0])
    throw Error("matmul: inner dimensions differ, " + shape_str(sa) + " x " + shape_str(sb) +
                " (inputs " + describe(a) + ", " + describe(b) + ")");
  Node n;
  n.op = Op::Matmul;
  n.shape = {sa[0], sb[1]};
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId a, int axis) {
  check_axis(node(a).shape, axis, "softmax");
  Node n;
  n.op = Op::Softmax;
  n.shape = node(a).shape;
  n.inputs = {a};
  n.axis = axis;
  return push(std::move(n));
}

NodeId Graph::reduce(Op op, NodeId a, int axis) {
  const Shape& s = node(a).shape;
  check_axis(s, axis, op_name(op));
  if (s[axis] == 0)
    throw Error(std::string(op_name(op)) + ": empty axis " + std::to_string(axis) +
                " in shape " + shape_str(s) + " (input " + describe(a) + ")");
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (static_cast<int>(i) != axis) out.push_back(s[i]);
  Node n;
  n.op = op;
  n.shape = std::move(out);
  n.inputs = {a};
  n.axis = axis;
  return push(std::move(n));
}

NodeId Graph::reduce_sum(NodeId a, int axis) { return reduce(Op::ReduceSum, a, axis); }
NodeId Graph::reduce_mean(NodeId a, int axis) { return reduce(Op::ReduceMean, a, axis); }
NodeId Graph::reduce_max(NodeId a, int axis) { return reduce(Op::ReduceMax, a, axis); }

NodeId Graph::concat(const std::vector<NodeId>& parts, int axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  const Shape& first = node(parts[0]).shape;
  check_axis(first, axis, "concat");
  Shape out = first;
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = node(parts[p]).shape;
    if (s.size() != first.size())
      throw Error("concat: rank mismatch at input " + describe(parts[p]));
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<int>(i) != axis && s[i] != first[i])
        throw Error("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(first) +
                    " at input " + describe(parts[p]));
    out[axis] += s[axis];
  }
  Node n;
  n.op = Op::Concat;
  n.shape = std::move(out);
  n.inputs = parts;
  n.axis = axis;
  return push(std::move(n));
}

NodeId Graph::slice(NodeId a, int axis, std::size_t index) {
  const Shape& s = node(a).shape;
  check_axis(s, axis, "slice");
  if (index >= s[axis])
    throw Error("slice: index " + std::to_string(index) + " out of range for shape " +
                shape_str(s) + " (input " + describe(a) + ")");
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (static_cast<int>(i) != axis) out.push_back(s[i]);
  Node n;
  n.op = Op::Slice;
  n.shape = std::move(out);
  n.inputs = {a};
  n.axis = axis;
  n.index = index;
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape target) {
  if (numel(target) != numel(node(a).shape))
    throw Error("reshape: cannot reshape " + shape_str(node(a).shape) + " to " +
                shape_str(target) + " (input " + describe(a) + ")");
  Node n;
  n.op = Op::Reshape;
  n.shape = std::move(target);
  n.inputs = {a};
  return push(std::move(n));
}

NodeId Graph::broadcast(NodeId a, Shape target) {
  if (!broadcastable(node(a).shape, target))
    throw Error("broadcast: incompatible broadcast " + shape_str(node(a).shape) + " to " +
                shape_str(target) + " (input " + describe(a) + ")");
  Node n;
  n.op = Op::Broadcast;
  n.shape = std::move(target);
  n.inputs = {a};
  return push(std::move(n));
}

void Graph::forward(std::span<const NodeId> outputs) {
  // Mark the subgraph the requested outputs depend on.
  std::vector<bool> needed(nodes_.size(), false);
  std::vector<NodeId> stack;
  for (NodeId id : outputs) {
    node(id);  // bounds check
    stack.push_back(id);
  }
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (needed[id] || nodes_[id].evaluated) continue;
    needed[id] = true;
    for (NodeId in : nodes_[id].inputs)
      if (!needed[in] && !nodes_[in].evaluated) stack.push_back(in);
  }
  for (NodeId id = 0; id < nodes_.size(); ++id)
    if (needed[id] && !nodes_[id].evaluated) eval(id);
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = node(id);
  if (!n.evaluated) throw Error("graph: node " + describe(id) + " has not been evaluated");
  return n.val;
}

void Graph::eval(NodeId id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].val; };
  Tensor out = Tensor::zeros(n.shape);
  const std::size_t count = out.data.size();

  auto ewise2 = [&](auto&& fn) {
    const Tensor& a = in(0);
    const Tensor& b = in(1);
    if (a.size() == b.size()) {
      for (std::size_t i = 0; i < count; ++i) out.data[i] = fn(a.data[i], b.data[i]);
    } else if (b.size() == 1) {
      const double bv = b.data[0];
      for (std::size_t i = 0; i < count; ++i) out.data[i] = fn(a.data[i], bv);
    } else {  // a scalar
      const double av = a.data[0];
      for (std::size_t i = 0; i < count; ++i) out.data[i] = fn(av, b.data[i]);
    }
  };
  auto ewise1 = [&](auto&& fn) {
    const Tensor& a = in(0);
    for (std::size_t i = 0; i < count; ++i) out.data[i] = fn(a.data[i]);
  };

  switch (n.op) {
    case Op::Constant:
    case Op::Variable:
      return;  // leaves carry their value
    case Op::Add: ewise2([](double a, double b) { return a + b; }); break;
    case Op::Sub: ewise2([](double a, double b) { return a - b; }); break;
    case Op::Mul: ewise2([](double a, double b) { return a * b; }); break;
    case Op::Div: ewise2([](double a, double b) { return a / b; }); break;
    case Op::Min: ewise2([](double a, double b) { return a <= b ? a : b; }); break;
    case Op::Max: ewise2([](double a, double b) { return a >= b ? a : b; }); break;
    case Op::StepLe: ewise2([](double a, double b) { return a <= b ? 1.0 : 0.0; }); break;
    case Op::Neg: ewise1([](double a) { return -a; }); break;
    case Op::Exp: ewise1([](double a) { return std::exp(a); }); break;
    case Op::Log: ewise1([](double a) { return std::log(a); }); break;
    case Op::Sigmoid: ewise1(stable_sigmoid); break;
    case Op::Tanh: ewise1([](double a) { return std::tanh(a); }); break;
    case Op::Relu: ewise1([](double a) { return a > 0.0 ? a : 0.0; }); break;
    case Op::Clamp:
      ewise1([&](double a) { return a < n.lo ? n.lo : (a > n.hi ? n.hi : a); });
      break;
    case Op::AssertUnit: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < count; ++i) {
        double v = a.data[i];
        if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
          throw Error("truth value outside [0,1]: " + std::to_string(v) + " from '" + n.tag +
                      "' (node " + describe(id) + ")");
        out.data[i] = v;
      }
      break;
    }
    case Op::Matmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.shape[0], k = a.shape[1], p = b.shape[1];
      MapConstMat ma(a.data.data(), m, k);
      MapConstMat mb(b.data.data(), k, p);
      MapMat mo(out.data.data(), m, p);
      mo.noalias() = ma * mb;
      break;
    }
    case Op::Softmax: {
      const Tensor& a = in(0);
      AxisSplit ax = split_at(a.shape, n.axis);
      for (std::size_t o = 0; o < ax.outer; ++o)
        for (std::size_t i = 0; i < ax.inner; ++i) {
          const std::size_t base = o * ax.n * ax.inner + i;
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < ax.n; ++k)
            m = std::max(m, a.data[base + k * ax.inner]);
          double sum = 0.0;
          for (std::size_t k = 0; k < ax.n; ++k) {
            double e = std::exp(a.data[base + k * ax.inner] - m);
            out.data[base + k * ax.inner] = e;
            sum += e;
          }
          for (std::size_t k = 0; k < ax.n; ++k) out.data[base + k * ax.inner] /= sum;
        }
      break;
    }
    case Op::ReduceSum:
    case Op::ReduceMean: {
      const Tensor& a = in(0);
      AxisSplit ax = split_at(a.shape, n.axis);
      for (std::size_t o = 0; o < ax.outer; ++o)
        for (std::size_t i = 0; i < ax.inner; ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k < ax.n; ++k) s += a.data[(o * ax.n + k) * ax.inner + i];
          out.data[o * ax.inner + i] = n.op == Op::ReduceMean ? s / double(ax.n) : s;
        }
      break;
    }
    case Op::ReduceMax: {
      const Tensor& a = in(0);
      AxisSplit ax = split_at(a.shape, n.axis);
      for (std::size_t o = 0; o < ax.outer; ++o)
        for (std::size_t i = 0; i < ax.inner; ++i) {
          double best = a.data[o * ax.n * ax.inner + i];
          for (std::size_t k = 1; k < ax.n; ++k)
            best = std::max(best, a.data[(o * ax.n + k) * ax.inner + i]);
          out.data[o * ax.inner + i] = best;
        }
      break;
    }
    case Op::Concat: {
      AxisSplit ax = split_at(n.shape, n.axis);
      std::size_t offset = 0;
      for (NodeId part : n.inputs) {
        const Tensor& a = nodes_[part].val;
        const std::size_t an = a.shape[n.axis];
        for (std::size_t o = 0; o < ax.outer; ++o)
          std::memcpy(out.data.data() + (o * ax.n + offset) * ax.inner,
                      a.data.data() + o * an * ax.inner, an * ax.inner * sizeof(double));
        offset += an;
      }
      break;
    }
    case Op::Slice: {
      const Tensor& a = in(0);
      AxisSplit ax = split_at(a.shape, n.axis);
      for (std::size_t o = 0; o < ax.outer; ++o)
        std::memcpy(out.data.data() + o * ax.inner,
                    a.data.data() + (o * ax.n + n.index) * ax.inner, ax.inner * sizeof(double));
      break;
    }
    case Op::Reshape:
      out.data = in(0).data;
      break;
    case Op::Broadcast: {
      const Tensor& a = in(0);
      Shape padded = pad_left(a.shape, n.shape.size());
      if (count > 0)
        broadcast_copy(a.data.data(), out.data.data(), padded.data(), n.shape.data(),
                       n.shape.size());
      break;
    }
  }
  n.val = std::move(out);
  n.evaluated = true;
}

GradientTape Graph::backward(NodeId output) {
  const Node& root = node(output);
  if (numel(root.shape) != 1)
    throw Error("backward: output must be scalar, got shape " + shape_str(root.shape) +
                " (node " + describe(output) + ")");
  if (!root.evaluated)
    throw Error("backward: run forward() over " + describe(output) + " first");

  GradientTape tape;
  if (!root.requires_grad) return tape;

  std::vector<std::optional<Tensor>> grads(static_cast<std::size_t>(output) + 1);
  grads[output] = Tensor::full(root.shape, 1.0);

  auto accum = [&](NodeId target, const Tensor& g, const Shape& gshape_of_use) {
    // Reduce g to the operand's shape when the kernel broadcast a scalar.
    const Node& t = nodes_[target];
    if (!t.requires_grad) return;
    Tensor add;
    if (same_shape(t.shape, gshape_of_use)) {
      add = g;
      add.shape = t.shape;
    } else {
      // operand was a broadcast scalar inside a binary kernel
      double s = 0.0;
      for (double v : g.data) s += v;
      add = Tensor::full(t.shape, 0.0);
      add.data[0] = s;
    }
    if (!grads[target]) {
      grads[target] = std::move(add);
    } else {
      Tensor& acc = *grads[target];
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += add.data[i];
    }
  };

  for (NodeId idn = output + 1; idn-- > 0;) {
    NodeId id = idn;
    Node& n = nodes_[id];
    if (!grads[id] || !n.requires_grad) {
      grads[id].reset();
      continue;
    }
    const Tensor& g = *grads[id];
    auto in_val = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].val; };
    auto in_id = [&](std::size_t k) { return n.inputs[k]; };

    // Per-element values of a possibly scalar-broadcast operand.
    auto opv = [&](const Tensor& t, std::size_t i) {
      return t.size() == 1 ? t.data[0] : t.data[i];
    };

    switch (n.op) {
      case Op::Variable:
        tape.accumulate(n.tag, g);
        break;
      case Op::Constant:
        break;
      case Op::Add:
        accum(in_id(0), g, n.shape);
        accum(in_id(1), g, n.shape);
        break;
      case Op::Sub: {
        accum(in_id(0), g, n.shape);
        Tensor gb = g;
        for (double& v : gb.data) v = -v;
        accum(in_id(1), gb, n.shape);
        break;
      }
      case Op::Mul: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        if (nodes_[in_id(0)].requires_grad) {
          Tensor ga = Tensor::zeros(n.shape);
          for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] = g.data[i] * opv(b, i);
          accum(in_id(0), ga, n.shape);
        }
        if (nodes_[in_id(1)].requires_grad) {
          Tensor gb = Tensor::zeros(n.shape);
          for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] = g.data[i] * opv(a, i);
          accum(in_id(1), gb, n.shape);
        }
        break;
      }
      case Op::Div: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        if (nodes_[in_id(0)].requires_grad) {
          Tensor ga = Tensor::zeros(n.shape);
          for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] = g.data[i] / opv(b, i);
          accum(in_id(0), ga, n.shape);
        }
        if (nodes_[in_id(1)].requires_grad) {
          Tensor gb = Tensor::zeros(n.shape);
          for (std::size_t i = 0; i < g.data.size(); ++i) {
            double bv = opv(b, i);
            gb.data[i] = -g.data[i] * opv(a, i) / (bv * bv);
          }
          accum(in_id(1), gb, n.shape);
        }
        break;
      }
      case Op::Min:
      case Op::Max: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        Tensor ga = Tensor::zeros(n.shape), gb = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          double av = opv(a, i), bv = opv(b, i);
          bool first = n.op == Op::Min ? av <= bv : av >= bv;
          (first ? ga.data[i] : gb.data[i]) = g.data[i];
        }
        accum(in_id(0), ga, n.shape);
        accum(in_id(1), gb, n.shape);
        break;
      }
      case Op::StepLe:
        break;  // piecewise constant
      case Op::Neg: {
        Tensor ga = g;
        for (double& v : ga.data) v = -v;
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::Exp: {
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] = g.data[i] * n.val.data[i];
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::Log: {
        const Tensor& a = in_val(0);
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] = g.data[i] / a.data[i];
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::Sigmoid: {
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          double s = n.val.data[i];
          ga.data[i] = g.data[i] * s * (1.0 - s);
        }
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::Tanh: {
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          double t = n.val.data[i];
          ga.data[i] = g.data[i] * (1.0 - t * t);
        }
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::Relu: {
        const Tensor& a = in_val(0);
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i)
          ga.data[i] = a.data[i] > 0.0 ? g.data[i] : 0.0;
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::Clamp: {
        const Tensor& a = in_val(0);
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i)
          ga.data[i] = (a.data[i] > n.lo && a.data[i] < n.hi) ? g.data[i] : 0.0;
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::AssertUnit:
        accum(in_id(0), g, n.shape);
        break;
      case Op::Matmul: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        const std::size_t m = a.shape[0], k = a.shape[1], p = b.shape[1];
        MapConstMat mg(g.data.data(), m, p);
        if (nodes_[in_id(0)].requires_grad) {
          Tensor ga = Tensor::zeros(a.shape);
          MapConstMat mb(b.data.data(), k, p);
          MapMat mga(ga.data.data(), m, k);
          mga.noalias() = mg * mb.transpose();
          accum(in_id(0), ga, a.shape);
        }
        if (nodes_[in_id(1)].requires_grad) {
          Tensor gb = Tensor::zeros(b.shape);
          MapConstMat ma(a.data.data(), m, k);
          MapMat mgb(gb.data.data(), k, p);
          mgb.noalias() = ma.transpose() * mg;
          accum(in_id(1), gb, b.shape);
        }
        break;
      }
      case Op::Softmax: {
        const Tensor& s = n.val;
        AxisSplit ax = split_at(n.shape, n.axis);
        Tensor ga = Tensor::zeros(n.shape);
        for (std::size_t o = 0; o < ax.outer; ++o)
          for (std::size_t i = 0; i < ax.inner; ++i) {
            const std::size_t base = o * ax.n * ax.inner + i;
            double dot = 0.0;
            for (std::size_t k = 0; k < ax.n; ++k)
              dot += g.data[base + k * ax.inner] * s.data[base + k * ax.inner];
            for (std::size_t k = 0; k < ax.n; ++k) {
              std::size_t idx = base + k * ax.inner;
              ga.data[idx] = s.data[idx] * (g.data[idx] - dot);
            }
          }
        accum(in_id(0), ga, n.shape);
        break;
      }
      case Op::ReduceSum:
      case Op::ReduceMean: {
        const Shape& ishape = nodes_[in_id(0)].shape;
        AxisSplit ax = split_at(ishape, n.axis);
        double scale = n.op == Op::ReduceMean ? 1.0 / double(ax.n) : 1.0;
        Tensor ga = Tensor::zeros(ishape);
        for (std::size_t o = 0; o < ax.outer; ++o)
          for (std::size_t k = 0; k < ax.n; ++k)
            for (std::size_t i = 0; i < ax.inner; ++i)
              ga.data[(o * ax.n + k) * ax.inner + i] = g.data[o * ax.inner + i] * scale;
        accum(in_id(0), ga, ishape);
        break;
      }
      case Op::ReduceMax: {
        const Tensor& a = in_val(0);
        AxisSplit ax = split_at(a.shape, n.axis);
        Tensor ga = Tensor::zeros(a.shape);
        for (std::size_t o = 0; o < ax.outer; ++o)
          for (std::size_t i = 0; i < ax.inner; ++i) {
            std::size_t best = 0;
            double bv = a.data[o * ax.n * ax.inner + i];
            for (std::size_t k = 1; k < ax.n; ++k) {
              double v = a.data[(o * ax.n + k) * ax.inner + i];
              if (v > bv) {
                bv = v;
                best = k;
              }
            }
            ga.data[(o * ax.n + best) * ax.inner + i] = g.data[o * ax.inner + i];
          }
        accum(in_id(0), ga, a.shape);
        break;
      }
      case Op::Concat: {
        AxisSplit ax = split_at(n.shape, n.axis);
        std::size_t offset = 0;
        for (NodeId part : n.inputs) {
          const Shape& ps = nodes_[part].shape;
          const std::size_t pn = ps[n.axis];
          if (nodes_[part].requires_grad) {
            Tensor gp = Tensor::zeros(ps);
            for (std::size_t o = 0; o < ax.outer; ++o)
              std::memcpy(gp.data.data() + o * pn * ax.inner,
                          g.data.data() + (o * ax.n + offset) * ax.inner,
                          pn * ax.inner * sizeof(double));
            accum(part, gp, ps);
          }
          offset += pn;
        }
        break;
      }
      case Op::Slice: {
        const Shape& ishape = nodes_[in_id(0)].shape;
        AxisSplit ax = split_at(ishape, n.axis);
        Tensor ga = Tensor::zeros(ishape);
        for (std::size_t o = 0; o < ax.outer; ++o)
          std::memcpy(ga.data.data() + (o * ax.n + n.index) * ax.inner,
                      g.data.data() + o * ax.inner, ax.inner * sizeof(double));
        accum(in_id(0), ga, ishape);
        break;
      }
      case Op::Reshape: {
        Tensor ga(nodes_[in_id(0)].shape, g.data);
        accum(in_id(0), ga, ga.shape);
        break;
      }
      case Op::Broadcast: {
        const Shape& ishape = nodes_[in_id(0)].shape;
        Shape padded = pad_left(ishape, n.shape.size());
        Tensor ga = Tensor::zeros(ishape);
        if (!g.data.empty())
          broadcast_reduce(g.data.data(), ga.data.data(), padded.data(), n.shape.data(),
                           n.shape.size());
        accum(in_id(0), ga, ishape);
        break;
      }
    }
    grads[id].reset();
  }
  return tape;
}

}  // namespace lyr
