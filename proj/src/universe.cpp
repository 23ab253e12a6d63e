#include "lyr/universe.hpp"

#include <filesystem>

#include "lyr/csv.hpp"

namespace lyr {
namespace {

namespace fs = std::filesystem;

std::string resolve(const std::string& data_dir, const std::string& file) {
  if (data_dir.empty()) return file;
  return (fs::path(data_dir) / file).string();
}

double param_number(const GivenArgs& a, const std::string& key) {
  auto it = a.params.find(key);
  if (it == a.params.end()) throw Error("given callable: missing parameter '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (...) {
    throw Error("given callable: parameter '" + key + "' is not a number");
  }
}

std::string param_string(const GivenArgs& a, const std::string& key) {
  auto it = a.params.find(key);
  if (it == a.params.end()) throw Error("given callable: missing parameter '" + key + "'");
  return it->second;
}

}  // namespace

NodeId DomainData::emit(Graph& g, ParamStore& params) const {
  if (extra.empty()) return g.constant(base);
  std::vector<NodeId> segments;
  segments.push_back(g.constant(base));
  // Merge runs of constant rows into single blocks.
  std::vector<std::vector<double>> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    segments.push_back(g.constant(Tensor::matrix(pending)));
    pending.clear();
  };
  for (const Extra& e : extra) {
    if (e.learnable) {
      flush();
      Tensor init = e.row;
      segments.push_back(
          g.variable(param_name(e.label), params.ensure(param_name(e.label), [&] { return init; })));
    } else {
      pending.push_back(e.row.data);
    }
  }
  flush();
  if (segments.size() == 1) return segments[0];
  return g.concat(segments, 0);
}

Tensor DomainData::materialize(const ParamStore& params) const {
  Tensor out = Tensor::zeros({count(), width});
  std::copy(base.data.begin(), base.data.end(), out.data.begin());
  std::size_t r = base.shape[0];
  for (const Extra& e : extra) {
    const Tensor* src = &e.row;
    if (e.learnable && params.has(param_name(e.label))) src = &params.at(param_name(e.label));
    std::copy(src->data.begin(), src->data.end(), out.data.begin() + r * width);
    ++r;
  }
  return out;
}

std::shared_ptr<PredicateBinding> GivenRegistry::make_predicate(const std::string& name,
                                                                const GivenArgs& args) const {
  auto it = preds_.find(name);
  if (it == preds_.end()) throw Error("unknown given predicate callable '" + name + "'");
  return it->second(args);
}

std::shared_ptr<FunctionBinding> GivenRegistry::make_function(const std::string& name,
                                                              const GivenArgs& args) const {
  auto it = funcs_.find(name);
  if (it == funcs_.end()) throw Error("unknown given function callable '" + name + "'");
  return it->second(args);
}

GivenRegistry GivenRegistry::builtins() {
  GivenRegistry r;
  r.add_predicate("rbf_close", [](const GivenArgs& a) {
    return std::make_shared<RbfPredicate>(param_number(a, "sigma"), param_number(a, "threshold"));
  });
  r.add_predicate("rbf", [](const GivenArgs& a) {
    return std::make_shared<RbfPredicate>(param_number(a, "sigma"), std::nullopt);
  });
  r.add_predicate("adjacency", [](const GivenArgs& a) {
    if (a.arg_counts.size() != 2) throw Error("adjacency: expects a binary predicate");
    Tensor t = Tensor::zeros({a.arg_counts[0], a.arg_counts[1]});
    for (auto [i, j] : load_pairs_csv(resolve(a.data_dir, param_string(a, "file")))) {
      if (i >= a.arg_counts[0] || j >= a.arg_counts[1])
        throw Error("adjacency: pair (" + std::to_string(i) + "," + std::to_string(j) +
                    ") out of domain range");
      t.data[i * a.arg_counts[1] + j] = 1.0;
    }
    return std::make_shared<TablePredicate>(std::move(t));
  });
  r.add_predicate("indicator", [](const GivenArgs& a) {
    if (a.arg_counts.size() != 1) throw Error("indicator: expects a unary predicate");
    Tensor t = Tensor::zeros({a.arg_counts[0]});
    for (std::size_t i : load_index_csv(resolve(a.data_dir, param_string(a, "file")))) {
      if (i >= a.arg_counts[0]) throw Error("indicator: index out of domain range");
      t.data[i] = 1.0;
    }
    return std::make_shared<TablePredicate>(std::move(t));
  });
  r.add_predicate("table", [](const GivenArgs& a) {
    Tensor t = load_matrix_csv(resolve(a.data_dir, param_string(a, "file")));
    if (a.arg_counts.size() == 1) {
      if (t.shape[1] != 1 || t.shape[0] != a.arg_counts[0])
        throw Error("table: expected a " + std::to_string(a.arg_counts[0]) + "x1 file");
      return std::make_shared<TablePredicate>(Tensor({a.arg_counts[0]}, std::move(t.data)));
    }
    if (a.arg_counts.size() == 2) {
      if (t.shape[0] != a.arg_counts[0] || t.shape[1] != a.arg_counts[1])
        throw Error("table: file shape does not match the domain sizes");
      return std::make_shared<TablePredicate>(std::move(t));
    }
    throw Error("table: only arity 1 or 2 supported");
  });
  r.add_function("reverse", [](const GivenArgs& a) {
    if (a.arg_widths.size() != 1) throw Error("reverse: expects a unary function");
    return std::make_shared<ReverseFunction>();
  });
  return r;
}

const DomainData& Universe::domain(const std::string& name) const {
  auto it = domains.find(name);
  if (it == domains.end()) throw Error("unknown domain '" + name + "'");
  return it->second;
}

SymbolTable Universe::symbols() const {
  SymbolTable t;
  for (const auto& [name, d] : domains) {
    t.domains.insert(name);
    for (const auto& [label, row] : d.label_row) t.individuals[label] = name;
  }
  for (const auto& [name, p] : predicates) t.predicates[name] = p.domains;
  for (const auto& [name, f] : functions) t.functions[name] = {f.domains, f.output};
  return t;
}

void Universe::materialize_params(ParamStore& params) const {
  for (const auto& [name, model] : learners) model->materialize(params);
  for (const auto& [dname, d] : domains)
    for (const DomainData::Extra& e : d.extra)
      if (e.learnable) {
        Tensor init = e.row;
        params.ensure(d.param_name(e.label), [&] { return init; });
      }
}

Universe build_universe(ProgramDecl&& decl, const std::string& data_dir,
                        const GivenRegistry& registry) {
  Universe u;

  for (DomainStanza& ds : decl.domains) {
    DomainData d;
    d.name = ds.name;
    if (ds.is_inline) {
      d.base = ds.inline_rows.empty() ? Tensor({0, 0}, {}) : Tensor::matrix(ds.inline_rows);
    } else {
      DomainCsv csv = load_domain_csv(resolve(data_dir, ds.csv));
      d.base = std::move(csv.data);
      for (std::size_t i = 0; i < csv.labels.size(); ++i) {
        if (d.label_row.count(csv.labels[i]))
          throw Error("domain " + d.name + ": duplicate individual label '" + csv.labels[i] + "'");
        d.label_row[csv.labels[i]] = i;
      }
    }
    d.width = d.base.shape[1];
    u.domain_order.push_back(d.name);
    u.domains.emplace(d.name, std::move(d));
  }

  {  // individual labels are unique program-wide
    std::map<std::string, std::string> seen;
    for (const auto& [dname, d] : u.domains)
      for (const auto& [label, row] : d.label_row) {
        auto [it, fresh] = seen.emplace(label, dname);
        if (!fresh)
          throw Error("individual label '" + label + "' appears in both domain " + it->second +
                      " and domain " + dname);
      }
  }

  for (IndividualStanza& is : decl.individuals) {
    auto it = u.domains.find(is.domain);
    if (it == u.domains.end()) throw Error("individual " + is.name + ": unknown domain");
    DomainData& d = it->second;
    DomainData::Extra e;
    e.label = is.name;
    e.learnable = is.learnable;
    if (is.learnable) {
      // Start at the mean of the constant rows (zero when there are none).
      Tensor mean = Tensor::zeros({1, d.width});
      if (d.base.shape[0] > 0) {
        for (std::size_t i = 0; i < d.base.shape[0]; ++i)
          for (std::size_t j = 0; j < d.width; ++j) mean.data[j] += d.base.at(i, j);
        for (double& v : mean.data) v /= double(d.base.shape[0]);
      }
      e.row = std::move(mean);
    } else {
      if (is.value.size() != d.width)
        throw Error("individual " + is.name + ": value width " + std::to_string(is.value.size()) +
                    " does not match domain width " + std::to_string(d.width));
      e.row = Tensor::row(is.value);
    }
    if (d.label_row.count(is.name))
      throw Error("individual " + is.name + ": label already used in domain " + d.name);
    d.label_row[is.name] = d.base.shape[0] + d.extra.size();
    d.extra.push_back(std::move(e));
  }

  auto widths_of = [&](const std::vector<std::string>& doms) {
    std::vector<std::size_t> w;
    for (const auto& name : doms) w.push_back(u.domain(name).width);
    return w;
  };
  auto counts_of = [&](const std::vector<std::string>& doms) {
    std::vector<std::size_t> c;
    for (const auto& name : doms) c.push_back(u.domain(name).count());
    return c;
  };
  auto sum_widths = [&](const std::vector<std::string>& doms) {
    std::size_t s = 0;
    for (const auto& name : doms) s += u.domain(name).width;
    return s;
  };

  auto make_model = [&](const std::string& name, const MlpDecl& m, std::size_t in_w,
                        std::size_t out_w) {
    MlpSpec spec;
    spec.widths.push_back(in_w);
    for (std::size_t h : m.hidden) spec.widths.push_back(h);
    spec.widths.push_back(out_w);
    spec.hidden = parse_act(m.activation);
    spec.output = parse_out_act(m.output);
    spec.seed = m.seed;
    return std::make_shared<MlpModel>(name, spec);
  };

  for (LearnerStanza& ls : decl.learners) {
    auto model = make_model(ls.name, ls.mlp, sum_widths(ls.input_domains), ls.out_width);
    u.learners.emplace(ls.name, std::move(model));
  }

  for (PredicateStanza& ps : decl.predicates) {
    Universe::Pred p;
    p.domains = ps.domains;
    switch (ps.impl.kind) {
      case ImplDecl::Kind::Mlp: {
        auto model = make_model(ps.name, ps.impl.mlp, sum_widths(ps.domains), 1);
        u.learners.emplace(ps.name, model);
        p.binding = std::make_shared<MlpPredicate>(model);
        break;
      }
      case ImplDecl::Kind::Slice: {
        auto it = u.learners.find(ps.impl.slice_learner);
        if (it == u.learners.end())
          throw Error("predicate " + ps.name + ": unknown learner '" + ps.impl.slice_learner +
                      "'");
        if (it->second->in_width() != sum_widths(ps.domains))
          throw Error("predicate " + ps.name + ": learner input width " +
                      std::to_string(it->second->in_width()) +
                      " does not match the declared domains");
        p.binding = std::make_shared<SlicePredicate>(it->second, ps.impl.slice_index);
        break;
      }
      case ImplDecl::Kind::Given: {
        GivenArgs args{ps.impl.given_params, widths_of(ps.domains), counts_of(ps.domains),
                       data_dir};
        p.binding = registry.make_predicate(ps.impl.given_name, args);
        break;
      }
    }
    u.predicates.emplace(ps.name, std::move(p));
  }

  for (FunctionStanza& fs : decl.functions) {
    Universe::Func f;
    f.domains = fs.domains;
    f.output = fs.out_domain;
    switch (fs.impl.kind) {
      case ImplDecl::Kind::Mlp: {
        auto model =
            make_model(fs.name, fs.impl.mlp, sum_widths(fs.domains), u.domain(fs.out_domain).width);
        u.learners.emplace(fs.name, model);
        f.binding = std::make_shared<MlpFunction>(model);
        break;
      }
      case ImplDecl::Kind::Given: {
        GivenArgs args{fs.impl.given_params, widths_of(fs.domains), counts_of(fs.domains),
                       data_dir};
        f.binding = registry.make_function(fs.impl.given_name, args);
        break;
      }
      case ImplDecl::Kind::Slice:
        throw Error("function " + fs.name + ": slice bindings apply to predicates only");
    }
    u.functions.emplace(fs.name, std::move(f));
  }

  SymbolTable symbols = u.symbols();
  for (ConstraintStanza& cs : decl.constraints) {
    Universe::Constraint c;
    c.text = cs.text;
    c.weight = cs.weight;
    c.test_only = cs.test_only;
    std::shared_ptr<Formula> ast{std::move(cs.ast)};
    sort_check(*ast, symbols);
    c.ast = std::move(ast);
    u.constraints.push_back(std::move(c));
  }

  for (PointwiseStanza& ps : decl.pointwise) {
    Universe::Pointwise pw;
    pw.symbol = ps.symbol;
    pw.name = ps.symbol;
    pw.weight = ps.weight;
    pw.loss = ps.loss;
    pw.inputs = load_matrix_csv(resolve(data_dir, ps.inputs_csv));
    pw.labels = load_matrix_csv(resolve(data_dir, ps.labels_csv));
    if (pw.inputs.shape[0] != pw.labels.shape[0])
      throw Error("pointwise " + ps.symbol + ": inputs have " +
                  std::to_string(pw.inputs.shape[0]) + " rows but labels have " +
                  std::to_string(pw.labels.shape[0]));
    if (u.predicates.count(ps.symbol)) {
      pw.is_learner = false;
    } else if (u.learners.count(ps.symbol)) {
      pw.is_learner = true;
    } else {
      throw Error("pointwise: unknown symbol '" + ps.symbol + "'");
    }
    u.pointwise.push_back(std::move(pw));
  }

  return u;
}

}  // namespace lyr
