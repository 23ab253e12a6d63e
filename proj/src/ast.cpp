#include "lyr/ast.hpp"

namespace lyr {
namespace {

bool term_equal(const Term& a, const Term& b) {
  if (a.kind != b.kind || a.name != b.name || a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!term_equal(a.args[i], b.args[i])) return false;
  return true;
}

// Binding strength; higher binds tighter. Quantifier bodies extend to the
// end of the expression, so a quantifier prints parens whenever it appears
// under any connective.
int precedence(Formula::Kind k) {
  switch (k) {
    case Formula::Kind::Iff: return 1;
    case Formula::Kind::Implies: return 2;
    case Formula::Kind::Or: return 3;
    case Formula::Kind::And: return 4;
    case Formula::Kind::Not: return 5;
    case Formula::Kind::Forall:
    case Formula::Kind::Exists: return 0;
    case Formula::Kind::Atom: return 6;
  }
  return 6;
}

std::string atom_text(const Formula& f) {
  std::string out = f.pred + "(";
  for (std::size_t i = 0; i < f.args.size(); ++i) {
    if (i) out += ", ";
    out += to_text(f.args[i]);
  }
  return out + ")";
}

void render(const Formula& f, int parent_prec, std::string& out) {
  const int prec = precedence(f.kind);
  const bool parens = prec < parent_prec;
  if (parens) out += "(";
  switch (f.kind) {
    case Formula::Kind::Forall:
    case Formula::Kind::Exists:
      out += f.kind == Formula::Kind::Forall ? "forall " : "exists ";
      out += f.var + ": ";
      render(*f.children[0], 0, out);
      break;
    case Formula::Kind::Not:
      out += "not ";
      render(*f.children[0], prec, out);
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      render(*f.children[0], prec, out);
      out += f.kind == Formula::Kind::And ? " and " : " or ";
      render(*f.children[1], prec + 1, out);  // left-associative
      break;
    case Formula::Kind::Implies:
      render(*f.children[0], prec + 1, out);  // right-associative
      out += " -> ";
      render(*f.children[1], prec, out);
      break;
    case Formula::Kind::Iff:
      render(*f.children[0], prec + 1, out);
      out += " <-> ";
      render(*f.children[1], prec, out);
      break;
    case Formula::Kind::Atom:
      out += atom_text(f);
      break;
  }
  if (parens) out += ")";
}

}  // namespace

std::unique_ptr<Formula> Formula::clone() const {
  auto f = std::make_unique<Formula>();
  f->kind = kind;
  f->var = var;
  f->sort = sort;
  f->pred = pred;
  f->args = args;
  f->span = span;
  for (const auto& c : children) f->children.push_back(c->clone());
  return f;
}

bool ast_equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind || a.var != b.var || a.sort != b.sort || a.pred != b.pred) return false;
  if (a.args.size() != b.args.size() || a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!term_equal(a.args[i], b.args[i])) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!ast_equal(*a.children[i], *b.children[i])) return false;
  return true;
}

std::string to_text(const Term& t) {
  if (t.kind != Term::Kind::Apply) return t.name;
  std::string out = t.name + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i) {
    if (i) out += ", ";
    out += to_text(t.args[i]);
  }
  return out + ")";
}

std::string to_text(const Formula& f) {
  std::string out;
  render(f, 0, out);
  return out;
}

}  // namespace lyr
