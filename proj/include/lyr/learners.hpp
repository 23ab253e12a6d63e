#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyr/graph.hpp"
#include "lyr/params.hpp"

namespace lyr {

enum class Act { Tanh, Relu, Sigmoid };
enum class OutAct { Sigmoid, Softmax, Identity };

Act parse_act(const std::string& s);
OutAct parse_out_act(const std::string& s);

struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Act hidden = Act::Tanh;
  OutAct output = OutAct::Sigmoid;
  std::uint64_t seed = 0;
};

/// Fully connected network y = act(x W + b) per layer, batch-first.
/// Parameters live in the caller's ParamStore under "<name>/W<i>" and
/// "<name>/b<i>"; weights start Glorot-uniform (seeded), biases at zero.
class MlpModel {
 public:
  MlpModel(std::string name, MlpSpec spec);

  /// Builds the forward pass onto the graph: [N,in] -> [N,out].
  NodeId emit(Graph& g, ParamStore& params, NodeId batch) const;

  /// Scalar path over one input row, reading current parameter values.
  /// Used by the naive interpreter; shares no code with emit().
  std::vector<double> host_forward(const ParamStore& params, std::span<const double> row) const;

  /// Create every parameter now (normally they appear on first emit).
  void materialize(ParamStore& params) const;

  const std::string& name() const { return name_; }
  const MlpSpec& spec() const { return spec_; }
  std::size_t in_width() const { return spec_.widths.front(); }
  std::size_t out_width() const { return spec_.widths.back(); }
  std::vector<std::string> param_names() const;

 private:
  Tensor init_weight(std::size_t layer) const;
  std::string name_;
  MlpSpec spec_;
};

// ---------------------------------------------------------------------------
// Bindings: how predicate and function symbols are evaluated over a block
// of grounding rows.

/// One argument of a grounded atom.
struct AtomArg {
  NodeId rows;                         // [N, width] materialized input block
  std::size_t width = 0;
  int grid_axis = -1;                  // >= 0 when the term is a plain variable
  std::optional<std::size_t> fixed_row;  // set when the term is an individual
};

/// The grounding of one atom: the Cartesian product of the domains of the
/// variables it mentions, in quantifier-nesting order.
struct AtomInputs {
  std::vector<std::size_t> grid;  // per-axis sizes (empty for closed atoms)
  std::size_t count = 1;          // product of grid
  std::vector<AtomArg> args;
};

/// Scalar-path argument for the naive interpreter.
struct HostArg {
  std::vector<double> row;
  std::optional<std::size_t> index;
};

struct EmitContext {
  Graph& g;
  ParamStore& params;
  // Shares one forward pass when several bindings evaluate the same model
  // on the same input block (e.g. slices of one network).
  std::map<std::pair<const MlpModel*, NodeId>, NodeId> model_cache;
};

class PredicateBinding {
 public:
  virtual ~PredicateBinding() = default;
  virtual bool learnable() const = 0;
  /// Truth values over the atom grounding, shape [N], each in [0,1].
  virtual NodeId emit(EmitContext& ctx, const AtomInputs& in) const = 0;
  virtual double eval_scalar(const ParamStore& params, const std::vector<HostArg>& args) const = 0;
};

class FunctionBinding {
 public:
  virtual ~FunctionBinding() = default;
  virtual bool learnable() const = 0;
  /// Output rows over the grounding, shape [N, out_width].
  virtual NodeId emit(EmitContext& ctx, const AtomInputs& in) const = 0;
  virtual std::vector<double> eval_row(const ParamStore& params,
                                       const std::vector<HostArg>& args) const = 0;
};

/// Shared helper: model forward over the concatenation of the argument
/// blocks, deduplicated through ctx.model_cache.
NodeId emit_model(EmitContext& ctx, const MlpModel& model, const AtomInputs& in);

// -- learnable bindings -----------------------------------------------------

/// Unary-output network as a predicate; requires sigmoid output of width 1.
class MlpPredicate : public PredicateBinding {
 public:
  explicit MlpPredicate(std::shared_ptr<const MlpModel> model);
  bool learnable() const override { return true; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  double eval_scalar(const ParamStore& params, const std::vector<HostArg>& args) const override;
  const MlpModel& model() const { return *model_; }

 private:
  std::shared_ptr<const MlpModel> model_;
};

/// One output column of a shared network; requires sigmoid or softmax output.
class SlicePredicate : public PredicateBinding {
 public:
  SlicePredicate(std::shared_ptr<const MlpModel> model, std::size_t index);
  bool learnable() const override { return true; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  double eval_scalar(const ParamStore& params, const std::vector<HostArg>& args) const override;
  const MlpModel& model() const { return *model_; }
  std::size_t index() const { return index_; }

 private:
  std::shared_ptr<const MlpModel> model_;
  std::size_t index_;
};

class MlpFunction : public FunctionBinding {
 public:
  explicit MlpFunction(std::shared_ptr<const MlpModel> model) : model_(std::move(model)) {}
  bool learnable() const override { return true; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  std::vector<double> eval_row(const ParamStore& params,
                               const std::vector<HostArg>& args) const override;

 private:
  std::shared_ptr<const MlpModel> model_;
};

// -- given (frozen) bindings -------------------------------------------------

/// Binary closeness kernel exp(-||a-b||^2 / sigma^2), optionally
/// thresholded to a 0/1 predicate.
class RbfPredicate : public PredicateBinding {
 public:
  RbfPredicate(double sigma, std::optional<double> threshold)
      : sigma_(sigma), threshold_(threshold) {
    if (!(sigma > 0.0)) throw Error("rbf: sigma must be positive");
  }
  bool learnable() const override { return false; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  double eval_scalar(const ParamStore& params, const std::vector<HostArg>& args) const override;

 private:
  double sigma_;
  std::optional<double> threshold_;
};

/// Truth table over row indices (vector for arity 1, matrix for arity 2).
/// Arguments must be plain variables or individuals.
class TablePredicate : public PredicateBinding {
 public:
  explicit TablePredicate(Tensor table);
  bool learnable() const override { return false; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  double eval_scalar(const ParamStore& params, const std::vector<HostArg>& args) const override;
  const Tensor& table() const { return table_; }

 private:
  double lookup(const std::vector<std::size_t>& idx) const;
  Tensor table_;
};

/// Fixed row reversal (a 180-degree rotation of flattened images).
class ReverseFunction : public FunctionBinding {
 public:
  bool learnable() const override { return false; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  std::vector<double> eval_row(const ParamStore& params,
                               const std::vector<HostArg>& args) const override;
};

/// One fresh truth value per row of a domain, squashed through a sigmoid.
/// Used by collective inference in place of a frozen classifier.
class TruthVarPredicate : public PredicateBinding {
 public:
  TruthVarPredicate(std::string param, Tensor init_logits);
  bool learnable() const override { return true; }
  NodeId emit(EmitContext& ctx, const AtomInputs& in) const override;
  double eval_scalar(const ParamStore& params, const std::vector<HostArg>& args) const override;
  const std::string& param() const { return param_; }

 private:
  std::string param_;
  Tensor init_;
};

}  // namespace lyr
