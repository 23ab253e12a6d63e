#include "lyr/naive.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lyr {
namespace {

// Scalar connective semantics, written out on purpose rather than shared
// with the graph builders. Implications follow the case form exactly.
struct ScalarTnorm {
  TNormFamily family;
  double eps;

  double conj(double x, double y) const {
    switch (family) {
      case TNormFamily::Product: return x * y;
      case TNormFamily::Lukasiewicz: return std::max(0.0, x + y - 1.0);
      case TNormFamily::Goedel: return std::min(x, y);
    }
    return 0.0;
  }
  double disj(double x, double y) const {
    switch (family) {
      case TNormFamily::Product: return (x + y) - x * y;
      case TNormFamily::Lukasiewicz: return std::min(x + y, 1.0);
      case TNormFamily::Goedel: return std::max(x, y);
    }
    return 0.0;
  }
  double neg(double x) const { return 1.0 - x; }
  double impl(double x, double y) const {
    switch (family) {
      case TNormFamily::Product: {
        double s = x <= y ? 1.0 : 0.0;
        return s + (1.0 - s) * (y / std::max(x, eps));
      }
      case TNormFamily::Lukasiewicz: return std::min((1.0 - x) + y, 1.0);
      case TNormFamily::Goedel: {
        double s = x <= y ? 1.0 : 0.0;
        return s + (1.0 - s) * y;
      }
    }
    return 0.0;
  }
  double iff(double x, double y) const { return conj(impl(x, y), impl(y, x)); }
};

class NaiveEval {
 public:
  NaiveEval(const Universe& u, const ParamStore& p, const TNormConfig& cfg, std::size_t cap)
      : uni_(u), params_(p), tn_{cfg.family, cfg.epsilon}, cap_(cap) {
    for (const auto& [name, d] : u.domains) host_[name] = d.materialize(p);
  }

  double eval(const Formula& f) {
    switch (f.kind) {
      case Formula::Kind::Forall:
      case Formula::Kind::Exists: {
        const Tensor& dom = host_.at(f.sort);
        const std::size_t n = dom.shape[0];
        if (n == 0) return f.kind == Formula::Kind::Forall ? 1.0 : 0.0;
        budget_ *= n;
        if (budget_ > double(cap_))
          throw Error("naive_eval: grounding cap of " + std::to_string(cap_) + " tuples exceeded");
        double acc = 0.0;
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
          env_.emplace_back(f.var, std::make_pair(f.sort, i));
          double v = eval(*f.children[0]);
          env_.pop_back();
          if (f.kind == Formula::Kind::Forall) {
            acc += v;
          } else {
            acc = first ? v : std::max(acc, v);
          }
          first = false;
        }
        budget_ /= double(n);
        return f.kind == Formula::Kind::Forall ? acc / double(n) : acc;
      }
      case Formula::Kind::And: return tn_.conj(eval(*f.children[0]), eval(*f.children[1]));
      case Formula::Kind::Or: return tn_.disj(eval(*f.children[0]), eval(*f.children[1]));
      case Formula::Kind::Not: return tn_.neg(eval(*f.children[0]));
      case Formula::Kind::Implies: return tn_.impl(eval(*f.children[0]), eval(*f.children[1]));
      case Formula::Kind::Iff: return tn_.iff(eval(*f.children[0]), eval(*f.children[1]));
      case Formula::Kind::Atom: {
        auto it = uni_.predicates.find(f.pred);
        if (it == uni_.predicates.end())
          throw Error("naive_eval: unknown predicate '" + f.pred + "'");
        std::vector<HostArg> args;
        args.reserve(f.args.size());
        for (const Term& t : f.args) args.push_back(term(t));
        double v = it->second.binding->eval_scalar(params_, args);
        if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
          throw Error("naive_eval: truth value outside [0,1] from '" + f.pred + "'");
        return v;
      }
    }
    throw Error("naive_eval: bad formula node");
  }

 private:
  HostArg term(const Term& t) {
    switch (t.kind) {
      case Term::Kind::Var: {
        for (auto it = env_.rbegin(); it != env_.rend(); ++it)
          if (it->first == t.name) {
            const Tensor& dom = host_.at(it->second.first);
            HostArg a;
            a.index = it->second.second;
            a.row.assign(dom.data.begin() + *a.index * dom.shape[1],
                         dom.data.begin() + (*a.index + 1) * dom.shape[1]);
            return a;
          }
        throw Error("naive_eval: unbound variable '" + t.name + "'");
      }
      case Term::Kind::Individual: {
        for (const auto& [dname, d] : uni_.domains) {
          auto it = d.label_row.find(t.name);
          if (it == d.label_row.end()) continue;
          const Tensor& dom = host_.at(dname);
          HostArg a;
          a.index = it->second;
          a.row.assign(dom.data.begin() + it->second * dom.shape[1],
                       dom.data.begin() + (it->second + 1) * dom.shape[1]);
          return a;
        }
        throw Error("naive_eval: unknown individual '" + t.name + "'");
      }
      case Term::Kind::Apply: {
        auto it = uni_.functions.find(t.name);
        if (it == uni_.functions.end())
          throw Error("naive_eval: unknown function '" + t.name + "'");
        std::vector<HostArg> args;
        for (const Term& a : t.args) args.push_back(term(a));
        HostArg out;
        out.row = it->second.binding->eval_row(params_, args);
        return out;  // result row has no domain index
      }
    }
    throw Error("naive_eval: bad term");
  }

  const Universe& uni_;
  const ParamStore& params_;
  ScalarTnorm tn_;
  std::size_t cap_;
  double budget_ = 1.0;
  std::map<std::string, Tensor> host_;
  std::vector<std::pair<std::string, std::pair<std::string, std::size_t>>> env_;
};

}  // namespace

double naive_eval(const Universe& universe, const ParamStore& params, const Formula& f,
                  const TNormConfig& cfg, std::size_t cap) {
  NaiveEval ev(universe, params, cfg, cap);
  return ev.eval(f);
}

}  // namespace lyr
