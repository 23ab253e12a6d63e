#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lyr/gradcheck.hpp"
#include "lyr/learners.hpp"
#include "lyr/rng.hpp"
#include "universes.hpp"
#include "testutil.hpp"

using namespace lyr;
using namespace lyrtest;

namespace {

MlpSpec spec_of(std::vector<std::size_t> widths, Act h, OutAct o, std::uint64_t seed) {
  MlpSpec s;
  s.widths = std::move(widths);
  s.hidden = h;
  s.output = o;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("zero parameters give 0.5 through a sigmoid output") {
  MlpModel m("m", spec_of({3, 4, 1}, Act::Tanh, OutAct::Sigmoid, 1));
  ParamStore params;
  m.materialize(params);
  for (auto& [name, t] : params.all())
    for (double& v : t.data) v = 0.0;
  Graph g;
  Rng rng(2);
  NodeId out = m.emit(g, params, g.constant(lyrtest::random_tensor(rng, {5, 3})));
  g.forward(out);
  for (double v : g.value(out).data) CHECK(v == 0.5);
}

TEST_CASE("softmax output rows sum to one") {
  MlpModel m("m", spec_of({4, 6, 3}, Act::Relu, OutAct::Softmax, 3));
  ParamStore params;
  Graph g;
  Rng rng(4);
  NodeId out = m.emit(g, params, g.constant(lyrtest::random_tensor(rng, {7, 4})));
  g.forward(out);
  const Tensor& t = g.value(out);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 3; ++j) s += t.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("identity single layer with unit weights is the identity") {
  MlpModel m("m", spec_of({3, 3}, Act::Tanh, OutAct::Identity, 5));
  ParamStore params;
  m.materialize(params);
  Tensor& w = params.at("m/W0");
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) w.at(i, j) = i == j ? 1.0 : 0.0;
  Graph g;
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  NodeId out = m.emit(g, params, g.constant(x));
  g.forward(out);
  CHECK(g.value(out).data == x.data);
}

TEST_CASE("initialization is deterministic per seed and layer") {
  MlpModel a("a", spec_of({3, 4, 1}, Act::Tanh, OutAct::Sigmoid, 42));
  MlpModel b("b", spec_of({3, 4, 1}, Act::Tanh, OutAct::Sigmoid, 42));
  ParamStore pa, pb;
  a.materialize(pa);
  b.materialize(pb);
  CHECK(pa.at("a/W0").data == pb.at("b/W0").data);
  MlpModel c("c", spec_of({3, 4, 1}, Act::Tanh, OutAct::Sigmoid, 43));
  ParamStore pc;
  c.materialize(pc);
  CHECK(pa.at("a/W0").data != pc.at("c/W0").data);
  // glorot bound
  double limit = std::sqrt(6.0 / (3 + 4));
  for (double v : pa.at("a/W0").data) CHECK(std::abs(v) <= limit);
  for (double v : pa.at("a/b0").data) CHECK(v == 0.0);
}

TEST_CASE("mlp gradients match finite differences") {
  MlpModel m("m", spec_of({3, 5, 2}, Act::Tanh, OutAct::Sigmoid, 8));
  ParamStore params;
  m.materialize(params);
  Rng rng(9);
  Tensor batch = lyrtest::random_tensor(rng, {6, 3});

  auto value = [&](const ParamStore& p) {
    Graph g;
    ParamStore copy = p;
    NodeId out = m.emit(g, copy, g.constant(batch));
    NodeId s = g.reduce_sum(g.reduce_sum(out, 1), 0);
    g.forward(s);
    return g.value(s).item();
  };
  Graph g;
  NodeId out = m.emit(g, params, g.constant(batch));
  NodeId s = g.reduce_sum(g.reduce_sum(out, 1), 0);
  g.forward(s);
  GradientTape tape = g.backward(s);

  double worst = 0.0;
  const double h = 1e-5;
  for (const std::string& name : m.param_names()) {
    Tensor& t = params.at(name);
    Tensor analytic = tape.get_or_zero(name, t.shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
      double saved = t.data[i];
      t.data[i] = saved + h;
      double up = value(params);
      t.data[i] = saved - h;
      double down = value(params);
      t.data[i] = saved;
      double fd = (up - down) / (2 * h);
      worst = std::max(worst,
                       std::abs(analytic.data[i] - fd) /
                           std::max({1.0, std::abs(analytic.data[i]), std::abs(fd)}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sliced predicates share one parameter set") {
  auto model = std::make_shared<MlpModel>("NN", spec_of({2, 4, 3}, Act::Relu, OutAct::Softmax, 6));
  SlicePredicate s0(model, 0), s1(model, 1);

  Universe u;
  add_domain(u, "D", {{0.1, 0.2}, {0.7, 0.4}, {0.3, 0.9}});
  u.learners["NN"] = model;
  u.predicates["P0"] = {{"D"}, std::make_shared<SlicePredicate>(model, 0)};
  u.predicates["P1"] = {{"D"}, std::make_shared<SlicePredicate>(model, 1)};
  add_constraint(u, "forall x: P0(x)");
  add_constraint(u, "forall x: P1(x)");

  ParamStore params;
  GradientTape tape = objective_grad(u, params, TrainOptions{});
  // parameter count equals the shared network's alone
  CHECK(params.count() == model->param_names().size());
  // gradients from both sliced predicates landed on the same tape keys
  std::vector<std::string> keys, expected = model->param_names();
  for (const auto& [k, v] : tape.all()) keys.push_back(k);
  std::sort(expected.begin(), expected.end());
  CHECK(keys == expected);

  // out-of-range slice and non-squashing outputs are rejected
  CHECK_THROWS_AS(SlicePredicate(model, 3), Error);
  auto ident = std::make_shared<MlpModel>("I", spec_of({2, 2}, Act::Tanh, OutAct::Identity, 1));
  CHECK_THROWS_WITH_AS(SlicePredicate(ident, 0), doctest::Contains("sigmoid or softmax"),
                       Error);
}

TEST_CASE("frozen given bindings register no parameters") {
  Universe u;
  add_domain(u, "D", {{0.0, 0.0}, {1.0, 1.0}, {2.0, 0.0}});
  u.predicates["Close"] = {{"D", "D"}, std::make_shared<RbfPredicate>(1.0, 0.5)};
  add_constraint(u, "forall x: forall y: Close(x,y)");
  // a frozen-only universe has nothing to learn
  ParamStore params;
  CHECK_THROWS_WITH_AS(train(u, params, TrainOptions{}), doctest::Contains("no learnable"),
                       Error);
  CHECK(params.empty());
  CHECK_FALSE(u.predicates.at("Close").binding->learnable());
}

TEST_CASE("rbf closeness is exactly one at zero distance") {
  RbfPredicate close(1.0, std::nullopt);
  ParamStore params;
  std::vector<HostArg> args{{{0.3, 0.4}, {}}, {{0.3, 0.4}, {}}};
  CHECK(close.eval_scalar(params, args) == 1.0);
  // thresholded form gives a crisp 0/1 answer
  RbfPredicate crisp(1.0, 0.5);
  CHECK(crisp.eval_scalar(params, args) == 1.0);
  std::vector<HostArg> far{{{0.0, 0.0}, {}}, {{5.0, 5.0}, {}}};
  CHECK(crisp.eval_scalar(params, far) == 0.0);
}

TEST_CASE("learnable individuals start at the domain mean and receive gradients") {
  ProgramDecl decl = parse_program(R"lyr(
domain D inline [[0.0, 2.0], [2.0, 0.0]]
individual M in D learnable
predicate A (D) = mlp hidden [3] activation tanh output sigmoid seed 2
constraint "forall x: A(x)"
)lyr");
  Universe u = build_universe(std::move(decl), "", GivenRegistry::builtins());
  ParamStore params;
  u.materialize_params(params);
  CHECK(params.at("individual/D/M").data == std::vector<double>{1.0, 1.0});

  GradientTape tape = objective_grad(u, params, TrainOptions{});
  const Tensor* g = tape.find("individual/D/M");
  REQUIRE(g != nullptr);
  double norm = 0;
  for (double v : g->data) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("n-ary learnable predicates concatenate their argument rows") {
  Universe u;
  add_domain(u, "A", {{0.1}, {0.9}});
  add_domain(u, "B", {{0.5, 0.5}, {0.2, 0.8}, {0.9, 0.1}});
  MlpSpec s = spec_of({3, 4, 1}, Act::Tanh, OutAct::Sigmoid, 12);
  auto model = std::make_shared<MlpModel>("Rel", s);
  u.learners["Rel"] = model;
  u.predicates["Rel"] = {{"A", "B"}, std::make_shared<MlpPredicate>(model)};

  ParamStore params;
  Graph g;
  Compiler comp(g, params, u, CompileOptions{});
  Universe::Constraint c = make_constraint(u, "forall a: forall b: Rel(a,b)");
  GroundedConstraint gc = comp.compile(*c.ast, 1.0, c.text);
  g.forward(gc.psi);
  double compiled = g.value(gc.psi).item();

  // oracle: mean over the 2x3 product of the host-side forward
  double expect = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<double> row{u.domain("A").base.at(i, 0), u.domain("B").base.at(j, 0),
                              u.domain("B").base.at(j, 1)};
      expect += model->host_forward(params, row)[0];
    }
  expect /= 6.0;
  CHECK(compiled == doctest::Approx(expect).epsilon(1e-12));
}
