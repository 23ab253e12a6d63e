#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lyr/compiler.hpp"
#include "lyr/gradcheck.hpp"
#include "lyr/naive.hpp"
#include "lyr/rng.hpp"
#include "universes.hpp"

using namespace lyr;
using namespace lyrtest;

namespace {

double compile_eval(const Universe& u, const std::string& text, TNormFamily fam,
                    ParamStore* store = nullptr, CompileStats* stats_out = nullptr) {
  ParamStore local;
  ParamStore& params = store ? *store : local;
  Graph g;
  Compiler comp(g, params, u, CompileOptions{TNormConfig{fam}, 10'000'000});
  Universe::Constraint c = make_constraint(u, text);
  GroundedConstraint gc = comp.compile(*c.ast, 1.0, text);
  g.forward(gc.psi);
  if (stats_out) *stats_out = comp.stats();
  return g.value(gc.psi).item();
}

const TNormFamily kFamilies[] = {TNormFamily::Product, TNormFamily::Lukasiewicz,
                                 TNormFamily::Goedel};

}  // namespace

TEST_CASE("implication over boolean tables is fully satisfied") {
  Universe u;
  add_domain(u, "Animals", {{0}, {1}});
  add_table_pred(u, "dog", {"Animals"}, Tensor::vector({1, 0}));
  add_table_pred(u, "mammal", {"Animals"}, Tensor::vector({1, 1}));
  for (TNormFamily fam : kFamilies)
    CHECK(compile_eval(u, "forall x: dog(x) -> mammal(x)", fam) == 1.0);
  // converse holds on half the groundings
  CHECK(compile_eval(u, "forall x: mammal(x) -> dog(x)", TNormFamily::Product) == 0.5);
}

TEST_CASE("universal truth degree is the satisfied fraction at boolean leaves") {
  Universe u;
  add_domain(u, "D", {{0}, {1}, {2}});
  add_table_pred(u, "P", {"D"}, Tensor::vector({1, 0, 1}));
  for (TNormFamily fam : kFamilies)
    CHECK(compile_eval(u, "forall x: P(x)", fam) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("nested quantifiers aggregate inner to outer") {
  Universe u;
  add_domain(u, "D", {{0}, {1}});
  add_table_pred(u, "R", {"D", "D"}, Tensor({2, 2}, {1, 0, 1, 1}));
  CHECK(compile_eval(u, "forall x: forall y: R(x,y)", TNormFamily::Product) ==
        doctest::Approx(0.75).epsilon(1e-12));

  Universe u2;
  add_domain(u2, "D", {{0}, {1}});
  add_table_pred(u2, "S", {"D", "D"}, Tensor({2, 2}, {0.1, 0.9, 0.8, 0.8}));
  CHECK(compile_eval(u2, "exists x: forall y: S(x,y)", TNormFamily::Product) ==
        doctest::Approx(0.8).epsilon(1e-12));
  // and the transposed nesting differs (mean of column maxima)
  CHECK(compile_eval(u2, "forall y: exists x: S(x,y)", TNormFamily::Product) ==
        doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("atoms are grounded once over their own product") {
  Universe u;
  add_domain(u, "Points", {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  u.predicates["Close"] = {{"Points", "Points"},
                           std::make_shared<RbfPredicate>(1.0, std::nullopt)};
  add_mlp_pred(u, "A", "Points", {4}, 7);

  CompileStats stats;
  ParamStore params;
  compile_eval(u, "forall p: forall q: Close(p,q) -> (A(p) <-> A(q))", TNormFamily::Product,
               &params, &stats);
  // three distinct atoms: Close(p,q), A(p), A(q)
  CHECK(stats.atom_evals == 3);
  CHECK(stats.per_symbol.at("A") == 2);
  CHECK(stats.per_symbol.at("Close") == 1);
}

TEST_CASE("repeated atoms share one grounding") {
  Universe u;
  add_domain(u, "D", {{0}, {1}, {2}});
  add_mlp_pred(u, "A", "D", {}, 3);
  CompileStats stats;
  ParamStore params;
  compile_eval(u, "forall x: A(x) and (A(x) or A(x))", TNormFamily::Product, &params, &stats);
  CHECK(stats.atom_evals == 1);
}

TEST_CASE("diagonal grounding when a variable repeats inside an atom") {
  Universe u;
  add_domain(u, "D", {{0}, {1}});
  add_table_pred(u, "R", {"D", "D"}, Tensor({2, 2}, {1, 0, 0, 0}));
  // R(x,x) selects the diagonal [1, 0]
  CHECK(compile_eval(u, "forall x: R(x,x)", TNormFamily::Product) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("closed formulas over individuals compile to scalars") {
  Universe u;
  add_domain(u, "D", {{0}, {1}});
  u.domains.at("D").label_row["Rex"] = 0;
  u.domains.at("D").label_row["Tom"] = 1;
  add_table_pred(u, "dog", {"D"}, Tensor::vector({1, 0}));
  CHECK(compile_eval(u, "dog(Rex)", TNormFamily::Product) == 1.0);
  CHECK(compile_eval(u, "dog(Tom)", TNormFamily::Product) == 0.0);
  CHECK(compile_eval(u, "dog(Rex) and not dog(Tom)", TNormFamily::Goedel) == 1.0);
}

TEST_CASE("empty domains quantify vacuously") {
  Universe u;
  add_domain(u, "E", {});
  add_mlp_pred(u, "A", "E", {}, 1);
  CHECK(compile_eval(u, "forall x: A(x)", TNormFamily::Product) == 1.0);
  CHECK(compile_eval(u, "exists x: A(x)", TNormFamily::Product) == 0.0);
  // inside an outer quantifier the vacuous value fills the outer grid
  Universe u2;
  add_domain(u2, "E", {});
  add_domain(u2, "D", {{0}, {1}});
  add_mlp_pred(u2, "A", "E", {}, 1);
  add_table_pred(u2, "P", {"D"}, Tensor::vector({1, 0}));
  CHECK(compile_eval(u2, "forall y: P(y) or exists x: A(x)", TNormFamily::Product) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("grounding cap guards the tuple count") {
  Universe u;
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({double(i)});
  add_domain(u, "D", rows);
  add_mlp_pred(u, "A", "D", {}, 1);
  Universe::Constraint c = make_constraint(u, "forall x: forall y: A(x) and A(y)");
  ParamStore params;
  Graph g;
  Compiler comp(g, params, u, CompileOptions{TNormConfig{}, 100});
  CHECK_THROWS_WITH_AS(comp.compile(*c.ast, 1.0, c.text),
                       doctest::Contains("grounding cap exceeded"), Error);
  // plan records the product
  Graph g2;
  Compiler comp2(g2, params, u, CompileOptions{TNormConfig{}, 1000});
  GroundedConstraint gc = comp2.compile(*c.ast, 1.0, c.text);
  CHECK(gc.plan.tuple_count == 400);
  REQUIRE(gc.plan.vars.size() == 2);
  CHECK(gc.plan.vars[0].name == "x");
  CHECK(gc.plan.vars[1].sort == "D");
}

TEST_CASE("function terms feed the consuming atom pointwise") {
  Universe u;
  add_domain(u, "Img", {{0.1, 0.9}, {0.4, 0.6}, {0.8, 0.2}});
  u.functions["rotate"] = {{"Img"}, "Img", std::make_shared<ReverseFunction>()};
  add_mlp_pred(u, "bird", "Img", {4}, 5);

  ParamStore params;
  double direct = compile_eval(u, "forall x: bird(x) -> bird(rotate(x))", TNormFamily::Product,
                               &params);
  double oracle;
  {
    Universe::Constraint c = make_constraint(u, "forall x: bird(x) -> bird(rotate(x))");
    oracle = naive_eval(u, params, *c.ast, TNormConfig{TNormFamily::Product});
  }
  CHECK(direct == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("given functions are parameter-free but pass gradients through") {
  Universe u;
  add_domain(u, "Img", {{0.2, 0.8}});
  u.functions["rotate"] = {{"Img"}, "Img", std::make_shared<ReverseFunction>()};
  add_mlp_pred(u, "bird", "Img", {3}, 11);
  // a learnable individual participates in the constraint through rotate()
  DomainData& d = u.domains.at("Img");
  DomainData::Extra e;
  e.label = "Mystery";
  e.learnable = true;
  e.row = Tensor::row({0.5, 0.5});
  d.label_row["Mystery"] = 1;
  d.extra.push_back(e);

  add_constraint(u, "forall x: bird(rotate(x))");

  ParamStore params;
  GradientTape tape = objective_grad(u, params, TrainOptions{});
  const Tensor* g = tape.find("individual/Img/Mystery");
  REQUIRE(g != nullptr);
  double norm = 0.0;
  for (double v : g->data) norm += v * v;
  CHECK(norm > 0.0);  // the given function is transparent to gradients
  // and contributes no parameters of its own
  CHECK(params.count() == 5);  // bird W0,b0,W1,b1 + the individual row
}

TEST_CASE("truth degree stays in the unit interval over random parameters") {
  Universe u;
  add_domain(u, "Points", {{0.0, 0.0}, {0.5, 0.25}, {1.0, 1.0}, {0.2, 0.9}});
  u.predicates["Close"] = {{"Points", "Points"},
                           std::make_shared<RbfPredicate>(0.8, std::nullopt)};
  add_mlp_pred(u, "A", "Points", {5}, 1);
  Universe::Constraint c =
      make_constraint(u, "forall p: forall q: Close(p,q) -> (A(p) <-> A(q))");

  Rng rng(31);
  for (int draw = 0; draw < 1000; ++draw) {
    TNormFamily fam = kFamilies[draw % 3];
    ParamStore params;
    u.materialize_params(params);
    for (auto& [name, t] : params.all())
      for (double& v : t.data) v = rng.uniform(-4.0, 4.0);
    Graph g;
    Compiler comp(g, params, u, CompileOptions{TNormConfig{fam}, 10'000'000});
    GroundedConstraint gc = comp.compile(*c.ast, 1.0, c.text);
    g.forward(gc.psi);
    double psi = g.value(gc.psi).item();
    CHECK(psi >= 0.0);
    CHECK(psi <= 1.0);
  }
}

TEST_CASE("compiled constraints match finite differences") {
  Universe u;
  add_domain(u, "Points", {{0.0, 0.1}, {0.9, 0.2}, {0.3, 0.8}, {0.6, 0.6}});
  u.predicates["Close"] = {{"Points", "Points"},
                           std::make_shared<RbfPredicate>(1.0, std::nullopt)};
  add_mlp_pred(u, "A", "Points", {4}, 3);
  add_mlp_pred(u, "B", "Points", {3}, 9);
  add_constraint(u, "forall p: forall q: Close(p,q) -> (A(p) <-> A(q))", 1.0);
  add_constraint(u, "forall x: A(x) or B(x)", 0.7);
  add_constraint(u, "exists x: A(x) and B(x)", 1.3);

  TrainOptions opts;
  opts.loss = LossMode::Log;
  ParamStore params;
  GradCheck gc = gradcheck_objective(u, params, opts, 120, 1e-5, 77);
  CHECK(gc.checks >= 100);
  CHECK_MESSAGE(gc.max_rel_err < 1e-3, "worst at ", gc.worst);

  // linear loss as well
  TrainOptions lin = opts;
  lin.loss = LossMode::Linear;
  GradCheck gc2 = gradcheck_objective(u, params, lin, 60, 1e-5, 78);
  CHECK(gc2.max_rel_err < 1e-3);
}

TEST_CASE("compiled evaluation agrees with the naive interpreter on small cases") {
  Universe u;
  add_domain(u, "D", {{0.2}, {0.8}, {0.5}, {0.1}});
  add_table_pred(u, "P", {"D"}, Tensor::vector({0.9, 0.2, 0.7, 0.4}));
  add_table_pred(u, "R", {"D", "D"},
                 Tensor({4, 4}, {0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 0.5, 0.5, 0.6, 0.4,
                                 0.3, 0.7, 0.8, 0.2}));
  for (const char* text : {
           "forall x: P(x)",
           "exists x: P(x)",
           "forall x: forall y: R(x,y) -> (P(x) <-> P(y))",
           "forall x: P(x) or exists y: R(x,y) and P(y)",
           "exists x: forall y: R(x,y) -> P(x)",
           "forall x: not P(x) or P(x)",
       }) {
    for (TNormFamily fam : kFamilies) {
      ParamStore params;
      double compiled = compile_eval(u, text, fam, &params);
      Universe::Constraint c = make_constraint(u, text);
      double naive = naive_eval(u, params, *c.ast, TNormConfig{fam});
      CHECK_MESSAGE(compiled == doctest::Approx(naive).epsilon(1e-9), text);
    }
  }
}
