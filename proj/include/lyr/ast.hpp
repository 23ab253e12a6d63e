#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lyr/tensor.hpp"

namespace lyr {

struct SourceSpan {
  int line = 0, col = 0;
};

/// A formula term: a quantified variable, a named individual, or a
/// function application over terms.
struct Term {
  enum class Kind { Var, Individual, Apply };
  Kind kind = Kind::Var;
  std::string name;
  std::vector<Term> args;  // Apply only
  SourceSpan span;

  static Term var(std::string n) { return {Kind::Var, std::move(n), {}, {}}; }
  static Term individual(std::string n) { return {Kind::Individual, std::move(n), {}, {}}; }
  static Term apply(std::string n, std::vector<Term> a) {
    return {Kind::Apply, std::move(n), std::move(a), {}};
  }
};

/// Typed expression tree for the formula sublanguage. Quantifier nodes
/// carry their bound variable; sort checking fills in `sort`.
struct Formula {
  enum class Kind { Forall, Exists, And, Or, Not, Implies, Iff, Atom };

  Kind kind;
  std::string var;   // quantifiers
  std::string sort;  // quantifiers, filled by sort_check
  std::string pred;  // atoms
  std::vector<Term> args;
  std::vector<std::unique_ptr<Formula>> children;
  SourceSpan span;

  static std::unique_ptr<Formula> quant(Kind k, std::string v, std::unique_ptr<Formula> body) {
    auto f = std::make_unique<Formula>();
    f->kind = k;
    f->var = std::move(v);
    f->children.push_back(std::move(body));
    return f;
  }
  static std::unique_ptr<Formula> connective(Kind k, std::unique_ptr<Formula> a,
                                             std::unique_ptr<Formula> b = nullptr) {
    auto f = std::make_unique<Formula>();
    f->kind = k;
    f->children.push_back(std::move(a));
    if (b) f->children.push_back(std::move(b));
    return f;
  }
  static std::unique_ptr<Formula> atom(std::string p, std::vector<Term> a) {
    auto f = std::make_unique<Formula>();
    f->kind = Kind::Atom;
    f->pred = std::move(p);
    f->args = std::move(a);
    return f;
  }

  std::unique_ptr<Formula> clone() const;
};

/// Structural equality; source spans are ignored, sorts are compared.
bool ast_equal(const Formula& a, const Formula& b);

/// Minimal-parenthesis rendering; parse(to_text(f)) reproduces f.
std::string to_text(const Formula& f);
std::string to_text(const Term& t);

}  // namespace lyr
