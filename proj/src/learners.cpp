#include "lyr/learners.hpp"

#include <cmath>

#include "lyr/gridops.hpp"
#include "lyr/rng.hpp"

namespace lyr {

Act parse_act(const std::string& s) {
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  if (s == "sigmoid") return Act::Sigmoid;
  throw Error("unknown activation '" + s + "' (expected tanh, relu or sigmoid)");
}

OutAct parse_out_act(const std::string& s) {
  if (s == "sigmoid") return OutAct::Sigmoid;
  if (s == "softmax") return OutAct::Softmax;
  if (s == "identity") return OutAct::Identity;
  throw Error("unknown output activation '" + s + "' (expected sigmoid, softmax or identity)");
}

MlpModel::MlpModel(std::string name, MlpSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
  if (spec_.widths.size() < 2) throw Error("mlp '" + name_ + "': needs at least input and output widths");
  for (std::size_t w : spec_.widths)
    if (w == 0) throw Error("mlp '" + name_ + "': zero layer width");
}

Tensor MlpModel::init_weight(std::size_t layer) const {
  const std::size_t fan_in = spec_.widths[layer], fan_out = spec_.widths[layer + 1];
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  // Layer-local stream so initialization does not depend on creation order.
  Rng rng(spec_.seed * 0x9e3779b97f4a7c15ULL + layer + 1);
  Tensor w = Tensor::zeros({fan_in, fan_out});
  for (double& v : w.data) v = rng.uniform(-limit, limit);
  return w;
}

void MlpModel::materialize(ParamStore& params) const {
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    params.ensure(name_ + "/W" + std::to_string(l), [&] { return init_weight(l); });
    params.ensure(name_ + "/b" + std::to_string(l),
                  [&] { return Tensor::zeros({spec_.widths[l + 1]}); });
  }
}

std::vector<std::string> MlpModel::param_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    out.push_back(name_ + "/W" + std::to_string(l));
    out.push_back(name_ + "/b" + std::to_string(l));
  }
  return out;
}

NodeId MlpModel::emit(Graph& g, ParamStore& params, NodeId batch) const {
  const Shape& s = g.shape(batch);
  if (s.size() != 2 || s[1] != in_width())
    throw Error("mlp '" + name_ + "': input width mismatch, expected [N," +
                std::to_string(in_width()) + "], got " + shape_str(s));
  materialize(params);
  NodeId x = batch;
  const std::size_t layers = spec_.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    NodeId w = g.variable(name_ + "/W" + std::to_string(l),
                          params.at(name_ + "/W" + std::to_string(l)));
    NodeId b = g.variable(name_ + "/b" + std::to_string(l),
                          params.at(name_ + "/b" + std::to_string(l)));
    // broadcast bias over rows
    NodeId brow = g.reshape(b, {1, spec_.widths[l + 1]});
    x = g.add(g.matmul(x, w), brow);
    const bool last = l + 1 == layers;
    if (!last) {
      switch (spec_.hidden) {
        case Act::Tanh: x = g.tanh(x); break;
        case Act::Relu: x = g.relu(x); break;
        case Act::Sigmoid: x = g.sigmoid(x); break;
      }
    } else {
      switch (spec_.output) {
        case OutAct::Sigmoid: x = g.sigmoid(x); break;
        case OutAct::Softmax: x = g.softmax(x, 1); break;
        case OutAct::Identity: break;
      }
    }
  }
  return x;
}

std::vector<double> MlpModel::host_forward(const ParamStore& params,
                                           std::span<const double> row) const {
  if (row.size() != in_width())
    throw Error("mlp '" + name_ + "': host input width mismatch");
  std::vector<double> x(row.begin(), row.end());
  const std::size_t layers = spec_.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params.at(name_ + "/W" + std::to_string(l));
    const Tensor& b = params.at(name_ + "/b" + std::to_string(l));
    const std::size_t out_w = spec_.widths[l + 1];
    std::vector<double> y(out_w);
    for (std::size_t j = 0; j < out_w; ++j) {
      double s = b.data[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w.data[i * out_w + j];
      y[j] = s;
    }
    const bool last = l + 1 == layers;
    if (!last) {
      for (double& v : y) {
        switch (spec_.hidden) {
          case Act::Tanh: v = std::tanh(v); break;
          case Act::Relu: v = v > 0.0 ? v : 0.0; break;
          case Act::Sigmoid: v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                          : std::exp(v) / (1.0 + std::exp(v)); break;
        }
      }
    } else if (spec_.output == OutAct::Sigmoid) {
      for (double& v : y)
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    } else if (spec_.output == OutAct::Softmax) {
      double m = y[0];
      for (double v : y) m = std::max(m, v);
      double sum = 0.0;
      for (double& v : y) {
        v = std::exp(v - m);
        sum += v;
      }
      for (double& v : y) v /= sum;
    }
    x = std::move(y);
  }
  return x;
}

// ---------------------------------------------------------------------------

namespace {

NodeId concat_args(Graph& g, const AtomInputs& in) {
  if (in.args.size() == 1) return in.args[0].rows;
  std::vector<NodeId> parts;
  parts.reserve(in.args.size());
  for (const AtomArg& a : in.args) parts.push_back(a.rows);
  return g.concat(parts, 1);
}

std::vector<double> concat_host(const std::vector<HostArg>& args) {
  std::vector<double> row;
  for (const HostArg& a : args) row.insert(row.end(), a.row.begin(), a.row.end());
  return row;
}

}  // namespace

NodeId emit_model(EmitContext& ctx, const MlpModel& model, const AtomInputs& in) {
  NodeId batch = concat_args(ctx.g, in);
  auto key = std::make_pair(&model, batch);
  auto it = ctx.model_cache.find(key);
  if (it != ctx.model_cache.end()) return it->second;
  NodeId out = model.emit(ctx.g, ctx.params, batch);
  ctx.model_cache.emplace(key, out);
  return out;
}

MlpPredicate::MlpPredicate(std::shared_ptr<const MlpModel> model) : model_(std::move(model)) {
  if (model_->out_width() != 1 || model_->spec().output != OutAct::Sigmoid)
    throw Error("predicate mlp '" + model_->name() +
                "': predicates need a width-1 sigmoid output so truth values stay in [0,1]");
}

NodeId MlpPredicate::emit(EmitContext& ctx, const AtomInputs& in) const {
  NodeId out = emit_model(ctx, *model_, in);  // [N,1]
  return ctx.g.reshape(out, {in.count});
}

double MlpPredicate::eval_scalar(const ParamStore& params,
                                 const std::vector<HostArg>& args) const {
  return model_->host_forward(params, concat_host(args))[0];
}

SlicePredicate::SlicePredicate(std::shared_ptr<const MlpModel> model, std::size_t index)
    : model_(std::move(model)), index_(index) {
  if (index_ >= model_->out_width())
    throw Error("slice of '" + model_->name() + "': index " + std::to_string(index_) +
                " out of range for output width " + std::to_string(model_->out_width()));
  if (model_->spec().output != OutAct::Sigmoid && model_->spec().output != OutAct::Softmax)
    throw Error("slice of '" + model_->name() +
                "': predicates need a sigmoid or softmax output so truth values stay in [0,1]");
}

NodeId SlicePredicate::emit(EmitContext& ctx, const AtomInputs& in) const {
  NodeId out = emit_model(ctx, *model_, in);  // [N,k]
  return ctx.g.slice(out, 1, index_);
}

double SlicePredicate::eval_scalar(const ParamStore& params,
                                   const std::vector<HostArg>& args) const {
  return model_->host_forward(params, concat_host(args))[index_];
}

NodeId MlpFunction::emit(EmitContext& ctx, const AtomInputs& in) const {
  return emit_model(ctx, *model_, in);
}

std::vector<double> MlpFunction::eval_row(const ParamStore& params,
                                          const std::vector<HostArg>& args) const {
  return model_->host_forward(params, concat_host(args));
}

NodeId RbfPredicate::emit(EmitContext& ctx, const AtomInputs& in) const {
  if (in.args.size() != 2) throw Error("rbf: expects exactly two arguments");
  Graph& g = ctx.g;
  NodeId diff = g.sub(in.args[0].rows, in.args[1].rows);
  NodeId d2 = g.reduce_sum(g.mul(diff, diff), 1);  // [N]
  NodeId k = g.exp(g.neg(g.div(d2, g.scalar(sigma_ * sigma_))));
  if (threshold_) return g.step_le(g.scalar(*threshold_), k);
  return k;
}

double RbfPredicate::eval_scalar(const ParamStore&, const std::vector<HostArg>& args) const {
  if (args.size() != 2 || args[0].row.size() != args[1].row.size())
    throw Error("rbf: expects two rows of equal width");
  double d2 = 0.0;
  for (std::size_t i = 0; i < args[0].row.size(); ++i) {
    double d = args[0].row[i] - args[1].row[i];
    d2 += d * d;
  }
  double k = std::exp(-(d2 / (sigma_ * sigma_)));
  if (threshold_) return *threshold_ <= k ? 1.0 : 0.0;
  return k;
}

TablePredicate::TablePredicate(Tensor table) : table_(std::move(table)) {
  if (table_.rank() != 1 && table_.rank() != 2)
    throw Error("table predicate: only arity 1 or 2 supported");
  for (double v : table_.data)
    if (!(v >= 0.0 && v <= 1.0))
      throw Error("table predicate: entries must lie in [0,1]");
}

double TablePredicate::lookup(const std::vector<std::size_t>& idx) const {
  if (table_.rank() == 1) return table_.data[idx[0]];
  return table_.data[idx[0] * table_.shape[1] + idx[1]];
}

NodeId TablePredicate::emit(EmitContext& ctx, const AtomInputs& in) const {
  if (in.args.size() != table_.rank())
    throw Error("table predicate: arity mismatch");
  // The values depend on row identities, not features: gather the table
  // over the atom grid host-side and emit one constant block.
  for (const AtomArg& a : in.args)
    if (a.grid_axis < 0 && !a.fixed_row)
      throw Error("table predicate: arguments must be variables or individuals");
  Tensor out = Tensor::zeros({in.count});
  std::vector<std::size_t> coord(in.grid.size(), 0);
  std::vector<std::size_t> idx(in.args.size(), 0);
  for (std::size_t n = 0; n < in.count; ++n) {
    std::size_t rem = n;
    for (std::size_t a = in.grid.size(); a-- > 0;) {
      coord[a] = rem % in.grid[a];
      rem /= in.grid[a];
    }
    for (std::size_t a = 0; a < in.args.size(); ++a)
      idx[a] = in.args[a].fixed_row ? *in.args[a].fixed_row
                                    : coord[in.args[a].grid_axis];
    out.data[n] = lookup(idx);
  }
  return ctx.g.constant(std::move(out));
}

double TablePredicate::eval_scalar(const ParamStore&, const std::vector<HostArg>& args) const {
  std::vector<std::size_t> idx;
  for (const HostArg& a : args) {
    if (!a.index) throw Error("table predicate: arguments must be variables or individuals");
    idx.push_back(*a.index);
  }
  if (idx.size() != table_.rank()) throw Error("table predicate: arity mismatch");
  return lookup(idx);
}

NodeId ReverseFunction::emit(EmitContext& ctx, const AtomInputs& in) const {
  if (in.args.size() != 1) throw Error("reverse: expects one argument");
  Graph& g = ctx.g;
  const std::size_t r = in.args[0].width;
  Tensor anti = Tensor::zeros({r, r});
  for (std::size_t i = 0; i < r; ++i) anti.data[i * r + (r - 1 - i)] = 1.0;
  return g.matmul(in.args[0].rows, g.constant(std::move(anti)));
}

std::vector<double> ReverseFunction::eval_row(const ParamStore&,
                                              const std::vector<HostArg>& args) const {
  if (args.size() != 1) throw Error("reverse: expects one argument");
  std::vector<double> out(args[0].row.rbegin(), args[0].row.rend());
  return out;
}

TruthVarPredicate::TruthVarPredicate(std::string param, Tensor init)
    : param_(std::move(param)), init_(std::move(init)) {
  if (init_.rank() != 1) throw Error("truth variables: init must be a vector of logits");
}

NodeId TruthVarPredicate::emit(EmitContext& ctx, const AtomInputs& in) const {
  if (in.args.size() != 1) throw Error("truth variables: unary predicates only");
  const AtomArg& a = in.args[0];
  Graph& g = ctx.g;
  NodeId z = g.variable(param_, ctx.params.ensure(param_, [&] { return init_; }));
  NodeId u = g.sigmoid(z);  // [n]
  if (a.fixed_row) {
    NodeId one = g.reshape(g.slice(u, 0, *a.fixed_row), Shape{});
    return g.broadcast(g.reshape(one, {1}), {in.count});
  }
  if (a.grid_axis < 0)
    throw Error("truth variables: arguments must be variables or individuals");
  if (in.grid[a.grid_axis] != init_.size())
    throw Error("truth variables: grounding size mismatch for '" + param_ + "'");
  return tile_vec_for_axis(g, u, in.grid, a.grid_axis);
}

double TruthVarPredicate::eval_scalar(const ParamStore& params,
                                      const std::vector<HostArg>& args) const {
  if (args.size() != 1 || !args[0].index)
    throw Error("truth variables: arguments must be variables or individuals");
  double z = params.at(param_).data[*args[0].index];
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace lyr
