#pragma once

#include <map>
#include <string>
#include <vector>

#include "lyr/gridops.hpp"
#include "lyr/tnorm.hpp"
#include "lyr/universe.hpp"

namespace lyr {

struct CompileOptions {
  TNormConfig tnorm;
  std::size_t cap = 10'000'000;  // grounding-tuple guard
};

struct GroundingPlan {
  struct QVar {
    std::string name;
    std::string sort;
    std::size_t size = 0;
  };
  std::vector<QVar> vars;
  std::size_t tuple_count = 1;  // product of quantified domain sizes
};

/// A compiled constraint: its scalar truth-degree node plus the plan it
/// was grounded with.
struct GroundedConstraint {
  std::string text;
  double weight = 1.0;
  GroundingPlan plan;
  NodeId psi = 0;  // scalar in [0,1]
};

struct CompileStats {
  std::size_t atom_evals = 0;  // distinct atoms actually evaluated
  std::map<std::string, std::size_t> per_symbol;
};

/// Lowers sort-checked formulas onto one graph. Keeps per-graph caches:
/// domain tensors, atom groundings (each distinct atom is evaluated once
/// over its own input product) and shared model forwards.
class Compiler {
 public:
  Compiler(Graph& g, ParamStore& params, const Universe& universe, CompileOptions opts);

  /// Formula -> scalar truth degree. Quantifiers aggregate inner-to-outer:
  /// forall averages over its axis, exists maximizes. An empty domain makes
  /// forall vacuously 1 and exists 0.
  GroundedConstraint compile(const Formula& f, double weight, const std::string& text);

  NodeId domain_node(const std::string& name);
  const CompileStats& stats() const { return stats_; }
  Graph& graph() { return ctx_.g; }
  EmitContext& emit_context() { return ctx_; }

 private:
  struct ScopeVar {
    std::string name;
    std::string sort;
    std::size_t size = 0;
  };

  NodeId visit(const Formula& f);
  NodeId atom_node(const Formula& f);
  NodeId term_block(const Term& t, const std::vector<ScopeVar>& vars,
                    const std::vector<std::size_t>& grid, AtomArg& info);
  std::vector<std::size_t> scope_shape() const;
  void collect_plan(const Formula& f, GroundingPlan& plan) const;

  EmitContext ctx_;
  const Universe& uni_;
  CompileOptions opts_;
  CompileStats stats_;
  std::vector<ScopeVar> scope_;
  std::map<std::string, NodeId> domain_cache_;
  std::map<std::string, NodeId> atom_cache_;      // atom text -> [own grid] node
  std::map<std::string, NodeId> expanded_cache_;  // atom text + scope -> scope-grid node
};

/// One-off convenience over a fresh Compiler.
GroundedConstraint compile_constraint(Graph& g, ParamStore& params, const Universe& universe,
                                      const Formula& f, double weight, const CompileOptions& opts,
                                      const std::string& text = "");

}  // namespace lyr
