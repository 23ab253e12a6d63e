#include "lyr/parse.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace lyr {
namespace {

enum class Tok {
  Ident,
  Number,
  String,
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  Comma,
  Colon,
  Equals,
  Arrow,   // ->
  DArrow,  // <->
  End,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(tok_, msg); }

  [[noreturn]] static void fail_at(const Token& t, const std::string& msg) {
    throw ParseError(std::to_string(t.line) + ":" + std::to_string(t.col) + ": " + msg);
  }

 private:
  void advance() {
    skip_ws();
    tok_ = Token{Tok::End, "", 0.0, line_, col_};
    if (pos_ >= src_.size()) return;
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      tok_.kind = Tok::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
        (c == '-' && pos_ + 1 < src_.size() &&
         (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '.'))) {
      std::size_t start = pos_;
      if (c == '-') bump();
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
              src_[pos_] == 'e' || src_[pos_] == 'E' ||
              ((src_[pos_] == '+' || src_[pos_] == '-') &&
               (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
        bump();
      tok_.text = src_.substr(start, pos_ - start);
      try {
        std::size_t used = 0;
        tok_.number = std::stod(tok_.text, &used);
        if (used != tok_.text.size()) throw std::invalid_argument("");
      } catch (...) {
        fail_at(tok_, "malformed number '" + tok_.text + "'");
      }
      tok_.kind = Tok::Number;
      return;
    }
    if (c == '"') {
      bump();
      std::string s;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        if (src_[pos_] == '\n') fail_at(tok_, "unterminated string");
        s += src_[pos_];
        bump();
      }
      if (pos_ >= src_.size()) fail_at(tok_, "unterminated string");
      bump();  // closing quote
      tok_.kind = Tok::String;
      tok_.text = std::move(s);
      return;
    }
    if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      bump();
      bump();
      tok_.kind = Tok::Arrow;
      tok_.text = "->";
      return;
    }
    if (c == '<' && src_.compare(pos_, 3, "<->") == 0) {
      bump();
      bump();
      bump();
      tok_.kind = Tok::DArrow;
      tok_.text = "<->";
      return;
    }
    switch (c) {
      case '(': tok_.kind = Tok::LParen; break;
      case ')': tok_.kind = Tok::RParen; break;
      case '[': tok_.kind = Tok::LBracket; break;
      case ']': tok_.kind = Tok::RBracket; break;
      case '{': tok_.kind = Tok::LBrace; break;
      case '}': tok_.kind = Tok::RBrace; break;
      case ',': tok_.kind = Tok::Comma; break;
      case ':': tok_.kind = Tok::Colon; break;
      case '=': tok_.kind = Tok::Equals; break;
      default:
        fail_at(tok_, std::string("unexpected character '") + c + "'");
    }
    tok_.text = std::string(1, c);
    bump();
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

bool is_keyword(const std::string& s) {
  return s == "forall" || s == "exists" || s == "and" || s == "or" || s == "not";
}

class FormulaParser {
 public:
  explicit FormulaParser(Lexer& lx) : lx_(lx) {}

  std::unique_ptr<Formula> formula() { return iff(); }

 private:
  std::unique_ptr<Formula> iff() {
    auto lhs = implies();
    if (lx_.peek().kind == Tok::DArrow) {
      lx_.take();
      return Formula::connective(Formula::Kind::Iff, std::move(lhs), iff());
    }
    return lhs;
  }

  std::unique_ptr<Formula> implies() {
    auto lhs = or_expr();
    if (lx_.peek().kind == Tok::Arrow) {
      lx_.take();
      return Formula::connective(Formula::Kind::Implies, std::move(lhs), implies());
    }
    return lhs;
  }

  std::unique_ptr<Formula> or_expr() {
    auto lhs = and_expr();
    while (lx_.peek().kind == Tok::Ident && lx_.peek().text == "or") {
      lx_.take();
      lhs = Formula::connective(Formula::Kind::Or, std::move(lhs), and_expr());
    }
    return lhs;
  }

  std::unique_ptr<Formula> and_expr() {
    auto lhs = unary();
    while (lx_.peek().kind == Tok::Ident && lx_.peek().text == "and") {
      lx_.take();
      lhs = Formula::connective(Formula::Kind::And, std::move(lhs), unary());
    }
    return lhs;
  }

  std::unique_ptr<Formula> unary() {
    const Token& t = lx_.peek();
    if (t.kind == Tok::LParen) {
      lx_.take();
      auto f = formula();
      expect(Tok::RParen, "expected ')'");
      return f;
    }
    if (t.kind != Tok::Ident) lx_.fail("expected a formula");
    if (t.text == "not") {
      Token nt = lx_.take();
      auto f = Formula::connective(Formula::Kind::Not, unary());
      f->span = {nt.line, nt.col};
      return f;
    }
    if (t.text == "forall" || t.text == "exists") {
      Token qt = lx_.take();
      Token var = lx_.take();
      if (var.kind != Tok::Ident || is_keyword(var.text))
        Lexer::fail_at(var, "expected a variable name after '" + qt.text + "'");
      expect(Tok::Colon, "expected ':' after quantified variable");
      auto body = formula();  // quantifier scope runs to the end of the expression
      auto f = Formula::quant(
          qt.text == "forall" ? Formula::Kind::Forall : Formula::Kind::Exists, var.text,
          std::move(body));
      f->span = {qt.line, qt.col};
      return f;
    }
    return atom();
  }

  std::unique_ptr<Formula> atom() {
    Token name = lx_.take();
    if (name.kind != Tok::Ident || is_keyword(name.text))
      Lexer::fail_at(name, "expected a predicate atom");
    expect(Tok::LParen, "expected '(' after predicate '" + name.text + "'");
    std::vector<Term> args;
    args.push_back(term());
    while (lx_.peek().kind == Tok::Comma) {
      lx_.take();
      args.push_back(term());
    }
    expect(Tok::RParen, "expected ')' closing atom '" + name.text + "'");
    auto f = Formula::atom(name.text, std::move(args));
    f->span = {name.line, name.col};
    return f;
  }

  Term term() {
    Token name = lx_.take();
    if (name.kind != Tok::Ident || is_keyword(name.text))
      Lexer::fail_at(name, "expected a term");
    if (lx_.peek().kind == Tok::LParen) {
      lx_.take();
      std::vector<Term> args;
      args.push_back(term());
      while (lx_.peek().kind == Tok::Comma) {
        lx_.take();
        args.push_back(term());
      }
      expect(Tok::RParen, "expected ')' closing application of '" + name.text + "'");
      Term t = Term::apply(name.text, std::move(args));
      t.span = {name.line, name.col};
      return t;
    }
    // Variable or individual; sort checking resolves which.
    Term t = Term::var(name.text);
    t.span = {name.line, name.col};
    return t;
  }

  void expect(Tok kind, const std::string& msg) {
    if (lx_.peek().kind != kind) lx_.fail(msg + ", got '" + lx_.peek().text + "'");
    lx_.take();
  }

  Lexer& lx_;
};

class ProgramParser {
 public:
  explicit ProgramParser(const std::string& src) : lx_(src) {}

  ProgramDecl parse() {
    ProgramDecl out;
    while (lx_.peek().kind != Tok::End) {
      Token head = lx_.take();
      if (head.kind != Tok::Ident) Lexer::fail_at(head, "expected a declaration");
      if (head.text == "domain") domain_stanza(out, head);
      else if (head.text == "individual") individual_stanza(out, head);
      else if (head.text == "learner") learner_stanza(out, head);
      else if (head.text == "predicate") predicate_stanza(out, head);
      else if (head.text == "function") function_stanza(out, head);
      else if (head.text == "constraint") constraint_stanza(out, head);
      else if (head.text == "pointwise") pointwise_stanza(out, head);
      else
        Lexer::fail_at(head, "unknown declaration '" + head.text + "'");
    }
    return out;
  }

 private:
  void declare(const Token& at, const std::string& name) {
    if (!names_.insert(name).second)
      Lexer::fail_at(at, "redefinition of '" + name + "'");
  }

  void require_domain(const Token& at, const std::string& name) {
    if (!domains_.count(name)) Lexer::fail_at(at, "unknown domain '" + name + "'");
  }

  void require_symbol(const Token& at, const std::string& name) {
    if (!names_.count(name)) Lexer::fail_at(at, "unknown symbol '" + name + "'");
  }

  Token expect_ident(const std::string& what) {
    Token t = lx_.take();
    if (t.kind != Tok::Ident) Lexer::fail_at(t, "expected " + what);
    return t;
  }

  void expect(Tok kind, const std::string& msg) {
    Token t = lx_.take();
    if (t.kind != kind) Lexer::fail_at(t, msg + ", got '" + t.text + "'");
  }

  double expect_number(const std::string& what) {
    Token t = lx_.take();
    if (t.kind != Tok::Number) Lexer::fail_at(t, "expected " + what);
    return t.number;
  }

  std::string expect_string(const std::string& what) {
    Token t = lx_.take();
    if (t.kind != Tok::String) Lexer::fail_at(t, "expected " + what);
    return t.text;
  }

  std::vector<double> number_list() {
    expect(Tok::LBracket, "expected '['");
    std::vector<double> v;
    if (lx_.peek().kind != Tok::RBracket) {
      v.push_back(expect_number("a number"));
      while (lx_.peek().kind == Tok::Comma) {
        lx_.take();
        v.push_back(expect_number("a number"));
      }
    }
    expect(Tok::RBracket, "expected ']'");
    return v;
  }

  std::vector<std::string> domain_list() {
    expect(Tok::LParen, "expected '(' before domain list");
    std::vector<std::string> v;
    Token d = expect_ident("a domain name");
    require_domain(d, d.text);
    v.push_back(d.text);
    while (lx_.peek().kind == Tok::Comma) {
      lx_.take();
      Token n = expect_ident("a domain name");
      require_domain(n, n.text);
      v.push_back(n.text);
    }
    expect(Tok::RParen, "expected ')' after domain list");
    return v;
  }

  MlpDecl mlp_decl() {
    MlpDecl m;
    while (lx_.peek().kind == Tok::Ident) {
      std::string key = lx_.peek().text;
      if (key == "hidden") {
        lx_.take();
        for (double w : number_list()) m.hidden.push_back(static_cast<std::size_t>(w));
      } else if (key == "activation") {
        lx_.take();
        m.activation = expect_ident("an activation name").text;
      } else if (key == "output") {
        lx_.take();
        m.output = expect_ident("an output activation name").text;
      } else if (key == "seed") {
        lx_.take();
        m.seed = static_cast<std::uint64_t>(expect_number("a seed"));
      } else {
        break;
      }
    }
    return m;
  }

  ImplDecl impl_decl(bool allow_slice) {
    Token kind = expect_ident("an implementation ('mlp', 'slice' or 'given')");
    ImplDecl impl;
    if (kind.text == "mlp") {
      impl.kind = ImplDecl::Kind::Mlp;
      impl.mlp = mlp_decl();
    } else if (kind.text == "slice" && allow_slice) {
      impl.kind = ImplDecl::Kind::Slice;
      Token learner = expect_ident("a learner name");
      require_symbol(learner, learner.text);
      impl.slice_learner = learner.text;
      impl.slice_index = static_cast<std::size_t>(expect_number("a slice index"));
    } else if (kind.text == "given") {
      impl.kind = ImplDecl::Kind::Given;
      impl.given_name = expect_ident("a given-callable name").text;
      if (lx_.peek().kind == Tok::LBrace) {
        lx_.take();
        while (lx_.peek().kind != Tok::RBrace) {
          Token key = expect_ident("a parameter name");
          expect(Tok::Equals, "expected '='");
          Token val = lx_.take();
          if (val.kind != Tok::Number && val.kind != Tok::String && val.kind != Tok::Ident)
            Lexer::fail_at(val, "expected a parameter value");
          impl.given_params[key.text] = val.text;
          if (lx_.peek().kind == Tok::Comma) lx_.take();
        }
        lx_.take();  // '}'
      }
    } else {
      Lexer::fail_at(kind, "unknown implementation '" + kind.text + "'");
    }
    return impl;
  }

  void domain_stanza(ProgramDecl& out, const Token& head) {
    Token name = expect_ident("a domain name");
    declare(name, name.text);
    domains_.insert(name.text);
    DomainStanza d;
    d.name = name.text;
    d.span = {head.line, head.col};
    Token mode = expect_ident("'from' or 'inline'");
    if (mode.text == "from") {
      d.csv = expect_string("a CSV file name");
    } else if (mode.text == "inline") {
      d.is_inline = true;
      expect(Tok::LBracket, "expected '['");
      if (lx_.peek().kind != Tok::RBracket) {
        d.inline_rows.push_back(number_list());
        while (lx_.peek().kind == Tok::Comma) {
          lx_.take();
          d.inline_rows.push_back(number_list());
        }
      }
      expect(Tok::RBracket, "expected ']'");
    } else {
      Lexer::fail_at(mode, "expected 'from' or 'inline'");
    }
    out.domains.push_back(std::move(d));
  }

  void individual_stanza(ProgramDecl& out, const Token& head) {
    Token name = expect_ident("an individual name");
    declare(name, name.text);
    IndividualStanza st;
    st.name = name.text;
    st.span = {head.line, head.col};
    Token kw = expect_ident("'in'");
    if (kw.text != "in") Lexer::fail_at(kw, "expected 'in'");
    Token dom = expect_ident("a domain name");
    require_domain(dom, dom.text);
    st.domain = dom.text;
    if (lx_.peek().kind == Tok::Equals) {
      lx_.take();
      st.value = number_list();
    } else {
      Token lrn = expect_ident("'learnable' or '='");
      if (lrn.text != "learnable") Lexer::fail_at(lrn, "expected 'learnable' or '='");
      st.learnable = true;
    }
    out.individuals.push_back(std::move(st));
  }

  void learner_stanza(ProgramDecl& out, const Token& head) {
    Token name = expect_ident("a learner name");
    declare(name, name.text);
    LearnerStanza st;
    st.name = name.text;
    st.span = {head.line, head.col};
    st.input_domains = domain_list();
    expect(Tok::Arrow, "expected '->' before output width");
    st.out_width = static_cast<std::size_t>(expect_number("an output width"));
    expect(Tok::Equals, "expected '='");
    Token kind = expect_ident("'mlp'");
    if (kind.text != "mlp") Lexer::fail_at(kind, "learners must be 'mlp'");
    st.mlp = mlp_decl();
    out.learners.push_back(std::move(st));
  }

  void predicate_stanza(ProgramDecl& out, const Token& head) {
    Token name = expect_ident("a predicate name");
    declare(name, name.text);
    PredicateStanza st;
    st.name = name.text;
    st.span = {head.line, head.col};
    st.domains = domain_list();
    expect(Tok::Equals, "expected '='");
    st.impl = impl_decl(/*allow_slice=*/true);
    out.predicates.push_back(std::move(st));
  }

  void function_stanza(ProgramDecl& out, const Token& head) {
    Token name = expect_ident("a function name");
    declare(name, name.text);
    FunctionStanza st;
    st.name = name.text;
    st.span = {head.line, head.col};
    st.domains = domain_list();
    expect(Tok::Arrow, "expected '->' before output domain");
    Token od = expect_ident("an output domain");
    require_domain(od, od.text);
    st.out_domain = od.text;
    expect(Tok::Equals, "expected '='");
    st.impl = impl_decl(/*allow_slice=*/false);
    out.functions.push_back(std::move(st));
  }

  void constraint_stanza(ProgramDecl& out, const Token& head) {
    ConstraintStanza st;
    st.span = {head.line, head.col};
    st.text = expect_string("a quoted formula");
    try {
      st.ast = parse_formula(st.text);
    } catch (const ParseError& e) {
      throw ParseError(std::to_string(head.line) + ":" + std::to_string(head.col) +
                       ": in constraint formula: " + e.what());
    }
    while (lx_.peek().kind == Tok::Ident) {
      std::string key = lx_.peek().text;
      if (key == "weight") {
        lx_.take();
        st.weight = expect_number("a weight");
        if (!(st.weight > 0.0))
          Lexer::fail_at(lx_.peek(), "constraint weight must be positive");
      } else if (key == "test_only") {
        lx_.take();
        st.test_only = true;
      } else {
        break;
      }
    }
    out.constraints.push_back(std::move(st));
  }

  void pointwise_stanza(ProgramDecl& out, const Token& head) {
    Token sym = expect_ident("a predicate or learner name");
    require_symbol(sym, sym.text);
    PointwiseStanza st;
    st.symbol = sym.text;
    st.span = {head.line, head.col};
    Token kw = expect_ident("'from'");
    if (kw.text != "from") Lexer::fail_at(kw, "expected 'from'");
    st.inputs_csv = expect_string("an inputs CSV file name");
    Token kw2 = expect_ident("'labels'");
    if (kw2.text != "labels") Lexer::fail_at(kw2, "expected 'labels'");
    st.labels_csv = expect_string("a labels CSV file name");
    while (lx_.peek().kind == Tok::Ident) {
      std::string key = lx_.peek().text;
      if (key == "weight") {
        lx_.take();
        st.weight = expect_number("a weight");
      } else if (key == "loss") {
        lx_.take();
        st.loss = parse_pw_loss(expect_ident("a loss name").text);
      } else {
        break;
      }
    }
    out.pointwise.push_back(std::move(st));
  }

  Lexer lx_;
  std::set<std::string> names_;
  std::set<std::string> domains_;
};

}  // namespace

PwLoss parse_pw_loss(const std::string& s) {
  if (s == "cross_entropy") return PwLoss::CrossEntropy;
  if (s == "squared_error") return PwLoss::SquaredError;
  throw Error("unknown pointwise loss '" + s + "' (expected cross_entropy or squared_error)");
}

std::unique_ptr<Formula> parse_formula(const std::string& text) {
  Lexer lx(text);
  FormulaParser p(lx);
  auto f = p.formula();
  if (lx.peek().kind != Tok::End)
    lx.fail("unexpected trailing input '" + lx.peek().text + "'");
  return f;
}

ProgramDecl parse_program(const std::string& text) {
  ProgramParser p(text);
  return p.parse();
}

ProgramDecl parse_program_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read program file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_program(ss.str());
}

}  // namespace lyr
