#include "lyr/sorts.hpp"

namespace lyr {
namespace {

std::string at(const SourceSpan& s) {
  return std::to_string(s.line) + ":" + std::to_string(s.col) + ": ";
}

class Checker {
 public:
  explicit Checker(const SymbolTable& sym) : sym_(sym) {}

  void check(Formula& f) {
    visit(f);
    for (auto& [var, info] : inferred_)
      if (info.sort.empty())
        throw SortError(at(info.span) + "cannot infer a sort for variable '" + var +
                        "': it never occurs in an atom");
  }

 private:
  struct VarInfo {
    std::string sort;
    SourceSpan span;
    Formula* quantifier = nullptr;
  };

  void visit(Formula& f) {
    switch (f.kind) {
      case Formula::Kind::Forall:
      case Formula::Kind::Exists: {
        if (scope_.count(f.var))
          throw SortError(at(f.span) + "variable '" + f.var +
                          "' is already bound by an enclosing quantifier");
        scope_.insert(f.var);
        inferred_[f.var] = VarInfo{"", f.span, &f};
        visit(*f.children[0]);
        f.sort = inferred_[f.var].sort;
        if (f.sort.empty())
          throw SortError(at(f.span) + "cannot infer a sort for variable '" + f.var +
                          "': it never occurs in an atom");
        inferred_.erase(f.var);
        scope_.erase(f.var);
        break;
      }
      case Formula::Kind::Atom: {
        auto it = sym_.predicates.find(f.pred);
        if (it == sym_.predicates.end()) {
          if (sym_.functions.count(f.pred))
            throw SortError(at(f.span) + "'" + f.pred +
                            "' is a function, not a predicate; atoms must be predicates");
          throw SortError(at(f.span) + "unknown predicate '" + f.pred + "'");
        }
        const auto& sig = it->second;
        if (sig.size() != f.args.size())
          throw SortError(at(f.span) + "predicate '" + f.pred + "' expects " +
                          std::to_string(sig.size()) + " argument(s), got " +
                          std::to_string(f.args.size()));
        for (std::size_t i = 0; i < f.args.size(); ++i) unify_term(f.args[i], sig[i]);
        break;
      }
      default:
        for (auto& c : f.children) visit(*c);
    }
  }

  void unify_term(Term& t, const std::string& expected) {
    switch (t.kind) {
      case Term::Kind::Var: {
        if (scope_.count(t.name)) {
          VarInfo& info = inferred_[t.name];
          if (info.sort.empty()) {
            info.sort = expected;
          } else if (info.sort != expected) {
            throw SortError(at(t.span) + "sort conflict for variable '" + t.name +
                            "': used as " + info.sort + " and as " + expected);
          }
          return;
        }
        auto ind = sym_.individuals.find(t.name);
        if (ind != sym_.individuals.end()) {
          t.kind = Term::Kind::Individual;
          if (ind->second != expected)
            throw SortError(at(t.span) + "individual '" + t.name + "' belongs to " +
                            ind->second + ", expected " + expected);
          return;
        }
        throw SortError(at(t.span) + "unknown symbol '" + t.name +
                        "': not a bound variable or declared individual");
      }
      case Term::Kind::Individual: {
        auto ind = sym_.individuals.find(t.name);
        if (ind == sym_.individuals.end())
          throw SortError(at(t.span) + "unknown individual '" + t.name + "'");
        if (ind->second != expected)
          throw SortError(at(t.span) + "individual '" + t.name + "' belongs to " + ind->second +
                          ", expected " + expected);
        return;
      }
      case Term::Kind::Apply: {
        auto fn = sym_.functions.find(t.name);
        if (fn == sym_.functions.end())
          throw SortError(at(t.span) + "unknown function '" + t.name + "'");
        const auto& sig = fn->second;
        if (sig.inputs.size() != t.args.size())
          throw SortError(at(t.span) + "function '" + t.name + "' expects " +
                          std::to_string(sig.inputs.size()) + " argument(s), got " +
                          std::to_string(t.args.size()));
        if (sig.output != expected)
          throw SortError(at(t.span) + "function '" + t.name + "' returns " + sig.output +
                          ", expected " + expected);
        for (std::size_t i = 0; i < t.args.size(); ++i) unify_term(t.args[i], sig.inputs[i]);
        return;
      }
    }
  }

  const SymbolTable& sym_;
  std::set<std::string> scope_;
  std::map<std::string, VarInfo> inferred_;
};

}  // namespace

void sort_check(Formula& f, const SymbolTable& symbols) {
  Checker(symbols).check(f);
}

}  // namespace lyr
