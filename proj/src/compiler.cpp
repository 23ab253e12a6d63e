#include "lyr/compiler.hpp"

#include <functional>

namespace lyr {
namespace {

std::string grid_key(const std::vector<std::size_t>& grid) {
  std::string s;
  for (std::size_t d : grid) s += std::to_string(d) + "x";
  return s;
}

}  // namespace

Compiler::Compiler(Graph& g, ParamStore& params, const Universe& universe, CompileOptions opts)
    : ctx_{g, params, {}}, uni_(universe), opts_(opts) {}

NodeId Compiler::domain_node(const std::string& name) {
  auto it = domain_cache_.find(name);
  if (it != domain_cache_.end()) return it->second;
  NodeId node = uni_.domain(name).emit(ctx_.g, ctx_.params);
  domain_cache_.emplace(name, node);
  return node;
}

std::vector<std::size_t> Compiler::scope_shape() const {
  std::vector<std::size_t> s;
  s.reserve(scope_.size());
  for (const ScopeVar& v : scope_) s.push_back(v.size);
  return s;
}

void Compiler::collect_plan(const Formula& f, GroundingPlan& plan) const {
  if (f.kind == Formula::Kind::Forall || f.kind == Formula::Kind::Exists) {
    std::size_t size = uni_.domain(f.sort).count();
    plan.vars.push_back({f.var, f.sort, size});
    if (size > 0) {
      if (plan.tuple_count > opts_.cap / size)
        plan.tuple_count = opts_.cap + 1;  // saturate; compile() reports
      else
        plan.tuple_count *= size;
    }
  }
  for (const auto& c : f.children) collect_plan(*c, plan);
}

GroundedConstraint Compiler::compile(const Formula& f, double weight, const std::string& text) {
  if (!scope_.empty()) throw Error("compiler: nested compile() calls are not supported");
  GroundedConstraint out;
  out.text = text.empty() ? to_text(f) : text;
  out.weight = weight;
  collect_plan(f, out.plan);
  if (out.plan.tuple_count > opts_.cap)
    throw Error("grounding cap exceeded for constraint \"" + out.text + "\": more than " +
                std::to_string(opts_.cap) + " tuples; raise --cap to allow this");
  NodeId psi = visit(f);
  if (!ctx_.g.shape(psi).empty()) psi = ctx_.g.reshape(psi, Shape{});
  out.psi = psi;
  return out;
}

NodeId Compiler::visit(const Formula& f) {
  Graph& g = ctx_.g;
  const TNormConfig& tn = opts_.tnorm;
  switch (f.kind) {
    case Formula::Kind::Forall:
    case Formula::Kind::Exists: {
      const std::size_t size = uni_.domain(f.sort).count();
      if (size == 0) {
        // Vacuous quantification over an empty domain.
        double v = f.kind == Formula::Kind::Forall ? 1.0 : 0.0;
        return g.constant(Tensor::full(scope_shape(), v));
      }
      scope_.push_back({f.var, f.sort, size});
      NodeId body = visit(*f.children[0]);
      scope_.pop_back();
      const int axis = static_cast<int>(scope_.size());
      return f.kind == Formula::Kind::Forall ? quantify_forall(g, body, axis)
                                             : quantify_exists(g, body, axis);
    }
    case Formula::Kind::And:
      return tnorm_and(g, visit(*f.children[0]), visit(*f.children[1]), tn);
    case Formula::Kind::Or:
      return tnorm_or(g, visit(*f.children[0]), visit(*f.children[1]), tn);
    case Formula::Kind::Not:
      return tnorm_not(g, visit(*f.children[0]), tn);
    case Formula::Kind::Implies:
      return tnorm_implies(g, visit(*f.children[0]), visit(*f.children[1]), tn);
    case Formula::Kind::Iff:
      return tnorm_iff(g, visit(*f.children[0]), visit(*f.children[1]), tn);
    case Formula::Kind::Atom:
      return atom_node(f);
  }
  throw Error("compiler: bad formula node");
}

NodeId Compiler::atom_node(const Formula& f) {
  Graph& g = ctx_.g;

  auto pit = uni_.predicates.find(f.pred);
  if (pit == uni_.predicates.end()) throw Error("compiler: unbound predicate '" + f.pred + "'");
  const Universe::Pred& pred = pit->second;

  // Variables this atom mentions, in quantifier-nesting order; the atom is
  // grounded over their Cartesian product only.
  std::vector<ScopeVar> vars;
  std::vector<int> own_axes;
  {
    std::vector<bool> used(scope_.size(), false);
    std::function<void(const Term&)> scan = [&](const Term& t) {
      if (t.kind == Term::Kind::Var) {
        for (std::size_t i = 0; i < scope_.size(); ++i)
          if (scope_[i].name == t.name) used[i] = true;
      }
      for (const Term& a : t.args) scan(a);
    };
    for (const Term& t : f.args) scan(t);
    for (std::size_t i = 0; i < scope_.size(); ++i)
      if (used[i]) {
        vars.push_back(scope_[i]);
        own_axes.push_back(static_cast<int>(i));
      }
  }

  // Cache keys carry the variable-to-axis binding: the same atom text under
  // a different quantifier nesting grounds in a different layout.
  std::string key = to_text(f) + "|";
  for (const ScopeVar& v : vars) key += v.name + ":" + std::to_string(v.size) + ",";
  const std::string skey = key + "@" + grid_key(scope_shape());
  if (auto it = expanded_cache_.find(skey); it != expanded_cache_.end()) return it->second;

  NodeId own = 0;
  if (auto it = atom_cache_.find(key); it != atom_cache_.end()) {
    own = it->second;
  } else {
    std::vector<std::size_t> grid;
    for (const ScopeVar& v : vars) grid.push_back(v.size);
    AtomInputs in;
    in.grid = grid;
    in.count = grid_count(grid);
    if (pred.domains.size() != f.args.size())
      throw Error("compiler: arity mismatch for '" + f.pred + "'");
    for (std::size_t a = 0; a < f.args.size(); ++a) {
      AtomArg arg;
      arg.rows = term_block(f.args[a], vars, grid, arg);
      arg.width = g.shape(arg.rows)[1];
      if (arg.width != uni_.domain(pred.domains[a]).width)
        throw Error("compiler: argument " + std::to_string(a) + " of " + to_text(f) +
                    " has width " + std::to_string(arg.width) + ", expected " +
                    std::to_string(uni_.domain(pred.domains[a]).width));
      in.args.push_back(std::move(arg));
    }
    NodeId values = pred.binding->emit(ctx_, in);  // [N]
    values = g.assert_unit(values, to_text(f));
    own = grid_unflatten(g, values, grid);
    atom_cache_.emplace(key, own);
    ++stats_.atom_evals;
    ++stats_.per_symbol[f.pred];
  }

  NodeId expanded = expand_to_scope(g, own, own_axes, scope_shape());
  expanded_cache_.emplace(skey, expanded);
  return expanded;
}

NodeId Compiler::term_block(const Term& t, const std::vector<ScopeVar>& vars,
                            const std::vector<std::size_t>& grid, AtomArg& info) {
  Graph& g = ctx_.g;
  switch (t.kind) {
    case Term::Kind::Var: {
      int axis = -1;
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == t.name) axis = static_cast<int>(i);
      if (axis < 0) throw Error("compiler: unbound variable '" + t.name + "'");
      info.grid_axis = axis;
      return tile_rows_for_axis(g, domain_node(vars[axis].sort), grid, axis);
    }
    case Term::Kind::Individual: {
      for (const auto& [dname, dom] : uni_.domains) {
        auto it = dom.label_row.find(t.name);
        if (it == dom.label_row.end()) continue;
        info.fixed_row = it->second;
        NodeId row = g.slice(domain_node(dname), 0, it->second);  // [r]
        NodeId shaped = g.reshape(row, {1, dom.width});
        return g.broadcast(shaped, {grid_count(grid), dom.width});
      }
      throw Error("compiler: unknown individual '" + t.name + "'");
    }
    case Term::Kind::Apply: {
      auto fit = uni_.functions.find(t.name);
      if (fit == uni_.functions.end())
        throw Error("compiler: unbound function '" + t.name + "'");
      const Universe::Func& fn = fit->second;
      AtomInputs in;
      in.grid = grid;
      in.count = grid_count(grid);
      for (std::size_t a = 0; a < t.args.size(); ++a) {
        AtomArg arg;
        arg.rows = term_block(t.args[a], vars, grid, arg);
        arg.width = g.shape(arg.rows)[1];
        in.args.push_back(std::move(arg));
      }
      // Applied pointwise over the grounding rows.
      return fn.binding->emit(ctx_, in);
    }
  }
  throw Error("compiler: bad term");
}

GroundedConstraint compile_constraint(Graph& g, ParamStore& params, const Universe& universe,
                                      const Formula& f, double weight, const CompileOptions& opts,
                                      const std::string& text) {
  Compiler c(g, params, universe, opts);
  return c.compile(f, weight, text);
}

}  // namespace lyr
