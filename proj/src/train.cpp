#include "lyr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "lyr/csv.hpp"

namespace lyr {
namespace {

// Split a pointwise input batch into per-argument constant blocks.
AtomInputs batch_inputs(Graph& g, const Universe& uni, const Universe::Pred& pred,
                        const Tensor& inputs) {
  const std::size_t n = inputs.shape[0];
  AtomInputs in;
  in.grid = {n};
  in.count = n;
  std::size_t offset = 0;
  for (const std::string& dname : pred.domains) {
    const std::size_t w = uni.domain(dname).width;
    Tensor block = Tensor::zeros({n, w});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) block.at(i, j) = inputs.data[i * inputs.shape[1] + offset + j];
    offset += w;
    AtomArg arg;
    arg.rows = g.constant(std::move(block));
    arg.width = w;
    arg.grid_axis = 0;
    in.args.push_back(std::move(arg));
  }
  if (offset != inputs.shape[1])
    throw Error("pointwise: input width " + std::to_string(inputs.shape[1]) +
                " does not match the predicate signature width " + std::to_string(offset));
  return in;
}

NodeId binary_ce(Graph& g, NodeId p, NodeId t, double eps) {
  NodeId term = g.add(g.mul(t, g.log(g.max(p, g.scalar(eps)))),
                      g.mul(g.sub(g.scalar(1.0), t),
                            g.log(g.max(g.sub(g.scalar(1.0), p), g.scalar(eps)))));
  while (g.shape(term).size() > 1) term = g.reduce_sum(term, 1);
  return g.neg(g.reduce_mean(term, 0));
}

NodeId categorical_ce(Graph& g, NodeId p, NodeId t, double eps) {
  NodeId term = g.reduce_sum(g.mul(t, g.log(g.max(p, g.scalar(eps)))), 1);
  return g.neg(g.reduce_mean(term, 0));
}

NodeId squared_error(Graph& g, NodeId p, NodeId t) {
  NodeId d = g.sub(p, t);
  NodeId sq = g.mul(d, d);
  while (g.shape(sq).size() > 1) sq = g.reduce_sum(sq, 1);
  return g.reduce_mean(sq, 0);
}

NodeId pointwise_loss(Compiler& comp, const Universe& uni, const Universe::Pointwise& pw) {
  Graph& g = comp.graph();
  constexpr double kEps = 1e-12;
  NodeId out = 0;     // model output
  NodeId labels = 0;  // targets
  bool softmax_out = false;
  if (pw.is_learner) {
    const auto& model = uni.learners.at(pw.symbol);
    if (pw.inputs.shape[1] != model->in_width())
      throw Error("pointwise " + pw.symbol + ": input width mismatch");
    if (pw.labels.shape[1] != model->out_width())
      throw Error("pointwise " + pw.symbol + ": label width " +
                  std::to_string(pw.labels.shape[1]) + " does not match model output " +
                  std::to_string(model->out_width()));
    out = model->emit(g, comp.emit_context().params, g.constant(pw.inputs));
    labels = g.constant(pw.labels);
    softmax_out = model->spec().output == OutAct::Softmax;
    if (pw.loss == PwLoss::CrossEntropy && model->spec().output == OutAct::Identity)
      throw Error("pointwise " + pw.symbol +
                  ": cross-entropy needs a sigmoid or softmax output; use loss squared_error");
  } else {
    const Universe::Pred& pred = uni.predicates.at(pw.symbol);
    if (!pred.binding->learnable())
      throw Error("pointwise " + pw.symbol + ": the binding is frozen, nothing to fit");
    AtomInputs in = batch_inputs(g, uni, pred, pw.inputs);
    out = pred.binding->emit(comp.emit_context(), in);  // [n]
    if (pw.labels.shape[1] != 1)
      throw Error("pointwise " + pw.symbol + ": predicate labels must be one column");
    Tensor t(Shape{pw.labels.shape[0]}, pw.labels.data);
    for (double v : t.data)
      if (pw.loss == PwLoss::CrossEntropy && !(v >= 0.0 && v <= 1.0))
        throw Error("pointwise " + pw.symbol + ": cross-entropy targets must lie in [0,1]");
    labels = g.constant(std::move(t));
  }
  switch (pw.loss) {
    case PwLoss::CrossEntropy:
      return softmax_out ? categorical_ce(g, out, labels, kEps) : binary_ce(g, out, labels, kEps);
    case PwLoss::SquaredError:
      return squared_error(g, out, labels);
  }
  throw Error("pointwise: bad loss kind");
}

}  // namespace

ObjectiveBuild build_objective(Compiler& comp, const Universe& uni, LossMode loss,
                               double lambda_scale) {
  Graph& g = comp.graph();
  ObjectiveBuild out;
  NodeId total = g.scalar(0.0);
  for (const Universe::Constraint& c : uni.constraints) {
    if (c.test_only) continue;
    const double lambda = c.weight * lambda_scale;
    if (lambda == 0.0) continue;
    GroundedConstraint gc = comp.compile(*c.ast, lambda, c.text);
    total = g.add(total, g.mul(g.scalar(lambda), loss_transform(g, gc.psi, loss)));
    out.constraints.push_back(std::move(gc));
  }
  for (const Universe::Pointwise& pw : uni.pointwise) {
    NodeId l = pointwise_loss(comp, uni, pw);
    total = g.add(total, g.mul(g.scalar(pw.weight), l));
    out.pointwise.push_back({pw.name, l, pw.weight});
  }
  out.total = total;
  return out;
}

TrainResult train(const Universe& uni, ParamStore& params, const TrainOptions& opts,
                  std::ostream* warnings) {
  uni.materialize_params(params);
  if (params.empty())
    throw Error("train: the program has no learnable parameters");

  Optimizer optimizer(opts.opt);
  TrainResult result;
  std::vector<double> history;
  bool warned = false;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Graph g;
    Compiler comp(g, params, uni, CompileOptions{opts.tnorm, opts.cap});
    ObjectiveBuild built = build_objective(comp, uni, opts.loss, opts.lambda_scale);

    std::vector<NodeId> outputs{built.total};
    for (const auto& c : built.constraints) outputs.push_back(c.psi);
    for (const auto& p : built.pointwise) outputs.push_back(p.loss);
    g.forward(outputs);

    EpochRow row;
    row.epoch = epoch;
    row.total = g.value(built.total).item();
    for (const auto& c : built.constraints) {
      double psi = g.value(c.psi).item();
      if (!std::isfinite(psi))
        throw Error("train: constraint \"" + c.text + "\" produced a non-finite truth degree");
      row.psis.push_back(psi);
    }
    for (const auto& p : built.pointwise) {
      double l = g.value(p.loss).item();
      if (!std::isfinite(l))
        throw Error("train: pointwise term '" + p.name + "' produced a non-finite loss");
      row.pw.push_back(l);
    }
    if (!std::isfinite(row.total)) {
      for (std::size_t i = 0; i < built.constraints.size(); ++i)
        if (!std::isfinite(row.psis[i]))
          throw Error("train: constraint \"" + built.constraints[i].text + "\" went non-finite");
      throw Error("train: total loss went non-finite");
    }

    if (result.rows.empty()) {
      for (const auto& c : built.constraints) result.constraint_names.push_back(c.text);
      for (const auto& p : built.pointwise) result.pw_names.push_back(p.name);
    }
    result.rows.push_back(row);
    history.push_back(row.total);
    if (warnings && !warned && history.size() > 50) {
      double before = history[history.size() - 51];
      if (row.total > before + 1e-3) {
        *warnings << "warning: total loss increased over the last 50 epochs (" << before << " -> "
                  << row.total << ")\n";
        warned = true;
      }
    }

    GradientTape tape = g.backward(built.total);
    optimizer.step(params, tape);
  }
  return result;
}

void write_metrics_csv(const std::string& path, const TrainResult& result) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write metrics file '" + path + "'");
  os << "epoch,total_loss";
  for (std::size_t i = 0; i < result.constraint_names.size(); ++i) os << ",psi_" << i;
  for (std::size_t i = 0; i < result.pw_names.size(); ++i) os << ",pw_" << i;
  os << "\n";
  for (const EpochRow& r : result.rows) {
    os << r.epoch << "," << format_double(r.total);
    for (double v : r.psis) os << "," << format_double(v);
    for (double v : r.pw) os << "," << format_double(v);
    os << "\n";
  }
  if (!os) throw Error("write failed for metrics file '" + path + "'");
}

std::vector<CheckResult> model_check(const Universe& uni, const ParamStore& params,
                                     const CheckOptions& opts) {
  ParamStore frozen = params;  // keep the caller's store untouched
  uni.materialize_params(frozen);
  Graph g;
  Compiler comp(g, frozen, uni, CompileOptions{opts.tnorm, opts.cap});
  std::vector<CheckResult> out;
  std::vector<NodeId> psis;
  for (const Universe::Constraint& c : uni.constraints) {
    if (opts.test_only_only && !c.test_only) continue;
    GroundedConstraint gc = comp.compile(*c.ast, c.weight, c.text);
    out.push_back({c.text, c.test_only, 0.0});
    psis.push_back(gc.psi);
  }
  g.forward(psis);
  for (std::size_t i = 0; i < psis.size(); ++i) out[i].psi = g.value(psis[i]).item();
  return out;
}

CollectiveResult collective_infer(const Universe& uni, const ParamStore& frozen,
                                  const CollectiveOptions& opts) {
  // Adjustable set: learnable unary predicates, in name order.
  std::vector<std::string> preds;
  for (const auto& [name, p] : uni.predicates)
    if (p.binding->learnable() && p.domains.size() == 1) preds.push_back(name);
  if (preds.empty())
    throw Error("collective: no learnable unary predicates to adjust");

  ParamStore snapshot = frozen;
  uni.materialize_params(snapshot);

  // Frozen predictions over each predicate's full domain become the priors.
  CollectiveResult result;
  result.predicates = preds;
  {
    Graph g;
    EmitContext ctx{g, snapshot, {}};
    std::map<std::string, NodeId> nodes;
    std::map<std::string, NodeId> domain_nodes;
    for (const std::string& name : preds) {
      const Universe::Pred& p = uni.predicates.at(name);
      const DomainData& dom = uni.domain(p.domains[0]);
      if (dom.count() == 0)
        throw Error("collective: the test set (domain " + dom.name + ") is empty");
      auto dit = domain_nodes.find(dom.name);
      if (dit == domain_nodes.end())
        dit = domain_nodes.emplace(dom.name, dom.emit(g, snapshot)).first;
      AtomInputs in;
      in.grid = {dom.count()};
      in.count = dom.count();
      AtomArg arg;
      arg.rows = dit->second;
      arg.width = dom.width;
      arg.grid_axis = 0;
      in.args.push_back(arg);
      nodes[name] = p.binding->emit(ctx, in);
    }
    std::vector<NodeId> outs;
    for (auto& [k, v] : nodes) outs.push_back(v);
    g.forward(outs);
    for (const std::string& name : preds) result.priors[name] = g.value(nodes[name]).data;
  }

  // Rebind: fresh truth values per row, initialized at the priors.
  Universe adjusted = uni;
  adjusted.pointwise.clear();
  ParamStore zstore;
  for (const std::string& name : preds) {
    const std::vector<double>& prior = result.priors.at(name);
    Tensor logits = Tensor::zeros({prior.size()});
    for (std::size_t i = 0; i < prior.size(); ++i) {
      double p = std::clamp(prior[i], 1e-6, 1.0 - 1e-6);
      logits.data[i] = std::log(p / (1.0 - p));
    }
    adjusted.predicates.at(name).binding =
        std::make_shared<TruthVarPredicate>("collective/" + name, logits);

    // Stay close to the priors: the usual pointwise mechanism with the
    // prior values as cross-entropy targets.
    Universe::Pointwise pw;
    pw.name = name + "~prior";
    pw.symbol = name;
    pw.is_learner = false;
    pw.inputs = uni.domain(uni.predicates.at(name).domains[0]).materialize(snapshot);
    pw.labels = Tensor({prior.size(), 1}, prior);
    pw.weight = opts.prior_weight;
    pw.loss = PwLoss::CrossEntropy;
    adjusted.pointwise.push_back(std::move(pw));
  }

  CheckOptions check{opts.tnorm, opts.cap, false};
  result.psi_before = model_check(adjusted, zstore, check);

  TrainOptions topts;
  topts.opt = opts.opt;
  topts.epochs = opts.steps;
  topts.loss = opts.loss;
  topts.tnorm = opts.tnorm;
  topts.cap = opts.cap;
  result.log = train(adjusted, zstore, topts);

  result.psi_after = model_check(adjusted, zstore, check);
  for (const std::string& name : preds) {
    const Tensor& z = zstore.at("collective/" + name);
    std::vector<double> u(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      u[i] = z.data[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z.data[i]))
                              : std::exp(z.data[i]) / (1.0 + std::exp(z.data[i]));
    result.adjusted[name] = std::move(u);
  }
  return result;
}

std::vector<DnfEntry> enumerate_dnf_checks(const Universe& uni, const ParamStore& params,
                                           const std::vector<std::string>& predicates,
                                           const DnfOptions& opts) {
  const std::size_t k = predicates.size();
  if (k == 0) throw Error("enumerate-dnf: no predicates given");
  std::string domain;
  for (const std::string& name : predicates) {
    auto it = uni.predicates.find(name);
    if (it == uni.predicates.end()) throw Error("enumerate-dnf: unknown predicate '" + name + "'");
    if (it->second.domains.size() != 1)
      throw Error("enumerate-dnf: predicate '" + name + "' is not unary");
    if (domain.empty()) domain = it->second.domains[0];
    if (it->second.domains[0] != domain)
      throw Error("enumerate-dnf: predicates range over different domains");
  }
  if (k >= 16) throw Error("enumerate-dnf: too many predicates");
  const std::size_t n_minterms = std::size_t(1) << k;
  if (n_minterms >= 63 || ((std::size_t(1) << n_minterms) - 1) > opts.max_formulas)
    throw Error("enumerate-dnf: " + std::to_string(k) +
                " predicates need more candidate formulas than the guard allows (" +
                std::to_string(opts.max_formulas) + ")");
  const std::size_t n_formulas = (std::size_t(1) << n_minterms) - 1;

  // Minterm m: predicate i appears positively when bit (k-1-i) is set, so
  // minterms enumerate in the conventional truth-table order.
  auto make_minterm = [&](std::size_t m) {
    std::unique_ptr<Formula> conj;
    for (std::size_t i = 0; i < k; ++i) {
      bool positive = (m >> (k - 1 - i)) & 1;
      auto lit = Formula::atom(predicates[i], {Term::var("x")});
      if (!positive) lit = Formula::connective(Formula::Kind::Not, std::move(lit));
      conj = conj ? Formula::connective(Formula::Kind::And, std::move(conj), std::move(lit))
                  : std::move(lit);
    }
    return conj;
  };

  SymbolTable symbols = uni.symbols();
  std::vector<DnfEntry> entries;
  Universe scratch = uni;  // reuse bindings; constraints are irrelevant here
  scratch.constraints.clear();
  for (std::size_t mask = 1; mask <= n_formulas; ++mask) {
    std::unique_ptr<Formula> dnf;
    std::size_t count = 0;
    for (std::size_t m = 0; m < n_minterms; ++m) {
      if (!((mask >> m) & 1)) continue;
      ++count;
      auto term = make_minterm(m);
      dnf = dnf ? Formula::connective(Formula::Kind::Or, std::move(dnf), std::move(term))
                : std::move(term);
    }
    auto f = Formula::quant(Formula::Kind::Forall, "x", std::move(dnf));
    sort_check(*f, symbols);
    Universe::Constraint c;
    c.text = to_text(*f);
    c.ast = std::shared_ptr<Formula>(std::move(f));
    scratch.constraints.push_back(std::move(c));
    DnfEntry e;
    e.text = scratch.constraints.back().text;
    e.minterms = count;
    e.tautology = count == n_minterms;
    entries.push_back(std::move(e));
  }

  auto checks = model_check(scratch, params, CheckOptions{opts.tnorm, opts.cap, false});
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].truth = checks[i].psi;

  std::sort(entries.begin(), entries.end(), [](const DnfEntry& a, const DnfEntry& b) {
    if (a.tautology != b.tautology) return !a.tautology;  // informative formulas first
    if (a.truth != b.truth) return a.truth > b.truth;
    if (a.minterms != b.minterms) return a.minterms < b.minterms;
    return a.text < b.text;
  });
  return entries;
}

}  // namespace lyr
