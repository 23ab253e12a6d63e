#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lyr/learners.hpp"
#include "lyr/program.hpp"
#include "lyr/sorts.hpp"

namespace lyr {

/// A sort: named rows in one representation space. Base rows come from
/// data; individually declared rows are appended and may be learnable,
/// in which case they are optimized like any other parameter.
struct DomainData {
  std::string name;
  std::size_t width = 0;
  Tensor base;  // [d, width] constant block
  struct Extra {
    std::string label;
    bool learnable = false;
    Tensor row;  // [1, width] initial value
  };
  std::vector<Extra> extra;
  std::map<std::string, std::size_t> label_row;

  std::size_t count() const { return base.shape[0] + extra.size(); }
  std::string param_name(const std::string& label) const {
    return "individual/" + name + "/" + label;
  }
  /// Assemble the [d, width] node; learnable rows are variable leaves, so
  /// every constraint that mentions them routes gradients back here.
  NodeId emit(Graph& g, ParamStore& params) const;
  /// Host-side copy with current parameter values.
  Tensor materialize(const ParamStore& params) const;
};

/// Factories for host-provided (given) symbols, keyed by name in `.lyr`
/// files. A factory sees the declared argument widths/counts and the data
/// directory for file-backed relations.
struct GivenArgs {
  std::map<std::string, std::string> params;
  std::vector<std::size_t> arg_widths;
  std::vector<std::size_t> arg_counts;
  std::string data_dir;
};

class GivenRegistry {
 public:
  using PredFactory = std::function<std::shared_ptr<PredicateBinding>(const GivenArgs&)>;
  using FuncFactory = std::function<std::shared_ptr<FunctionBinding>(const GivenArgs&)>;

  void add_predicate(const std::string& name, PredFactory f) { preds_[name] = std::move(f); }
  void add_function(const std::string& name, FuncFactory f) { funcs_[name] = std::move(f); }

  std::shared_ptr<PredicateBinding> make_predicate(const std::string& name,
                                                   const GivenArgs& args) const;
  std::shared_ptr<FunctionBinding> make_function(const std::string& name,
                                                 const GivenArgs& args) const;

  /// Registry with the built-in callables:
  ///   predicates: rbf_close{sigma,threshold}, rbf{sigma},
  ///               adjacency{file}, indicator{file}, table{file}
  ///   functions:  reverse
  static GivenRegistry builtins();

 private:
  std::map<std::string, PredFactory> preds_;
  std::map<std::string, FuncFactory> funcs_;
};

/// Everything a program declares, resolved and bound: the runtime model
/// that grounding, training and checking operate on.
struct Universe {
  struct Pred {
    std::vector<std::string> domains;
    std::shared_ptr<PredicateBinding> binding;
  };
  struct Func {
    std::vector<std::string> domains;
    std::string output;
    std::shared_ptr<FunctionBinding> binding;
  };
  struct Constraint {
    std::string text;
    std::shared_ptr<Formula> ast;  // sort-checked
    double weight = 1.0;
    bool test_only = false;
  };
  struct Pointwise {
    std::string name;    // for logs
    std::string symbol;  // predicate or learner
    bool is_learner = false;
    Tensor inputs;
    Tensor labels;
    double weight = 1.0;
    PwLoss loss = PwLoss::CrossEntropy;
  };

  std::vector<std::string> domain_order;
  std::map<std::string, DomainData> domains;
  std::map<std::string, Pred> predicates;
  std::map<std::string, Func> functions;
  std::map<std::string, std::shared_ptr<MlpModel>> learners;
  std::vector<Constraint> constraints;
  std::vector<Pointwise> pointwise;

  const DomainData& domain(const std::string& name) const;
  SymbolTable symbols() const;
  /// Force-create every learnable parameter (models and individuals).
  void materialize_params(ParamStore& params) const;
};

/// Resolve a parsed program against data files and given callables;
/// sort-checks every constraint.
Universe build_universe(ProgramDecl&& decl, const std::string& data_dir,
                        const GivenRegistry& registry);

}  // namespace lyr
