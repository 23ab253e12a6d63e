#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "lyr/checkpoint.hpp"
#include "lyr/graph.hpp"
#include "lyr/optimizer.hpp"
#include "testutil.hpp"

using namespace lyr;
using namespace lyrtest;

TEST_CASE("elementwise add") {
  Graph g;
  NodeId a = g.constant(Tensor::vector({1, 2}));
  NodeId b = g.constant(Tensor::vector({3, 4}));
  NodeId c = g.add(a, b);
  g.forward(c);
  CHECK(g.value(c).data == std::vector<double>{4, 6});
}

TEST_CASE("matmul shape algebra") {
  Graph g;
  NodeId a = g.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  NodeId b = g.constant(Tensor({3, 2}, {7, 8, 9, 10, 11, 12}));
  NodeId m = g.matmul(a, b);
  CHECK(g.shape(m) == Shape{2, 2});
  g.forward(m);
  CHECK(g.value(m).data == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("sigmoid symmetry at zero") {
  Graph g;
  NodeId y = g.sigmoid(g.scalar(0.0));
  g.forward(y);
  CHECK(g.value(y).item() == 0.5);
}

TEST_CASE("shape mismatch errors name the node") {
  Graph g;
  NodeId a = g.constant(Tensor::zeros({2, 3}));
  NodeId b = g.constant(Tensor::zeros({4, 2}));
  CHECK_THROWS_WITH_AS(g.matmul(a, b),
                       doctest::Contains("matmul: inner dimensions differ"), Error);
  CHECK_THROWS_AS(g.add(a, b), Error);  // incompatible broadcast
  CHECK_THROWS_WITH_AS(g.reduce_mean(a, 2), doctest::Contains("axis 2 out of range"), Error);
}

TEST_CASE("backward rejects non-scalar outputs") {
  Graph g;
  NodeId a = g.variable("w", Tensor::vector({1, 2}));
  NodeId b = g.mul(a, a);
  g.forward(b);
  CHECK_THROWS_WITH_AS(g.backward(b), doctest::Contains("must be scalar"), Error);
}

TEST_CASE("linear derivative through a variable") {
  Graph g;
  NodeId w = g.variable("w", Tensor::scalar(2.0));
  NodeId x = g.constant(Tensor::scalar(3.0));
  NodeId y = g.mul(w, x);
  g.forward(y);
  GradientTape tape = g.backward(y);
  CHECK(tape.find("w")->data[0] == 3.0);
  // constants never receive gradients
  CHECK(tape.all().size() == 1);
}

TEST_CASE("sigmoid derivative at zero") {
  Graph g;
  NodeId w = g.variable("w", Tensor::scalar(0.0));
  NodeId y = g.sigmoid(w);
  g.forward(y);
  GradientTape tape = g.backward(y);
  CHECK(tape.find("w")->data[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("reduce examples") {
  Graph g;
  NodeId v = g.constant(Tensor::vector({0.2, 0.4, 0.6}));
  NodeId mean = g.reduce_mean(v, 0);
  NodeId mx = g.reduce_max(v, 0);
  g.forward(std::vector<NodeId>{mean, mx});
  CHECK(g.value(mean).item() == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(g.value(mx).item() == 0.6);
}

TEST_CASE("reduce_max routes gradient to the single argmax") {
  Graph g;
  NodeId w = g.variable("w", Tensor::vector({0.2, 0.4, 0.6}));
  NodeId y = g.reduce_max(w, 0);
  g.forward(y);
  GradientTape tape = g.backward(y);
  CHECK(tape.find("w")->data == std::vector<double>{0, 0, 1});
}

TEST_CASE("reduce_max tie goes to the lowest index") {
  Graph g;
  NodeId w = g.variable("w", Tensor::vector({0.7, 0.7, 0.1}));
  NodeId y = g.reduce_max(w, 0);
  g.forward(y);
  GradientTape tape = g.backward(y);
  CHECK(tape.find("w")->data == std::vector<double>{1, 0, 0});
}

TEST_CASE("softmax symmetry and normalization") {
  Graph g;
  NodeId a = g.constant(Tensor::vector({0.0, 0.0}));
  NodeId s = g.softmax(a, 0);
  g.forward(s);
  CHECK(g.value(s).data == std::vector<double>{0.5, 0.5});

  Graph g2;
  Rng rng(7);
  NodeId b = g2.constant(random_tensor(rng, {5, 4}));
  NodeId s2 = g2.softmax(b, 1);
  g2.forward(s2);
  for (std::size_t i = 0; i < 5; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < 4; ++j) sum += g2.value(s2).at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("forward is deterministic") {
  auto build = [](Graph& g) {
    Rng rng(42);
    NodeId a = g.constant(random_tensor(rng, {6, 6}));
    NodeId b = g.constant(random_tensor(rng, {6, 6}));
    return g.reduce_sum(g.reduce_sum(g.sigmoid(g.matmul(a, g.tanh(b))), 1), 0);
  };
  Graph g1, g2;
  NodeId o1 = build(g1), o2 = build(g2);
  g1.forward(o1);
  g2.forward(o2);
  CHECK(g1.value(o1).data == g2.value(o2).data);  // bit-identical
}

TEST_CASE("tape is linear: grad of a sum is the sum of grads") {
  Rng rng(3);
  Tensor w = random_tensor(rng, {4});
  auto fa = [](Graph& g, const std::vector<Tensor>& v) {
    return g.reduce_sum(g.sigmoid(var(g, v, 0)), 0);
  };
  auto fb = [](Graph& g, const std::vector<Tensor>& v) {
    return g.reduce_max(g.mul(var(g, v, 0), var(g, v, 0)), 0);
  };
  auto fsum = [&](Graph& g, const std::vector<Tensor>& v) { return g.add(fa(g, v), fb(g, v)); };

  auto grad_of = [&](const ScalarFn& fn) {
    Graph g;
    std::vector<Tensor> vars{w};
    NodeId out = fn(g, vars);
    g.forward(out);
    return g.backward(out).get_or_zero("v0", w.shape);
  };
  Tensor ga = grad_of(fa), gb = grad_of(fb), gs = grad_of(fsum);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(gs.data[i] == doctest::Approx(ga.data[i] + gb.data[i]).epsilon(1e-12));
}

TEST_CASE("mean times count equals sum") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor t = random_tensor(rng, {7, 3});
    Graph g;
    NodeId c = g.constant(t);
    NodeId mean = g.reduce_mean(c, 0);
    NodeId scaled = g.mul(mean, g.scalar(7.0));
    NodeId sum = g.reduce_sum(c, 0);
    g.forward(std::vector<NodeId>{scaled, sum});
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(g.value(scaled).data[j] ==
            doctest::Approx(g.value(sum).data[j]).epsilon(1e-9));
  }
}

TEST_CASE("broadcast and concat round out the op set") {
  Graph g;
  NodeId a = g.constant(Tensor({2, 1}, {1, 2}));
  NodeId b = g.broadcast(a, {2, 3});
  g.forward(b);
  CHECK(g.value(b).data == std::vector<double>{1, 1, 1, 2, 2, 2});

  NodeId c = g.concat({g.constant(Tensor({1, 2}, {5, 6})), g.constant(Tensor({2, 2}, {7, 8, 9, 10}))}, 0);
  g.forward(c);
  CHECK(g.value(c).data == std::vector<double>{5, 6, 7, 8, 9, 10});

  NodeId s = g.slice(c, 0, 1);
  g.forward(s);
  CHECK(g.value(s).data == std::vector<double>{7, 8});

  CHECK_THROWS_AS(g.broadcast(g.constant(Tensor::zeros({3})), Shape{2, 2}), Error);
}

// Every differentiable op against central finite differences, sampled away
// from kinks (ties, clamp edges, relu zero). h = 1e-5, rel err < 1e-4.
TEST_CASE("gradient property: every op matches finite differences") {
  Rng rng(2024);
  double worst = 0.0;
  std::size_t checks = 0;
  auto run = [&](const ScalarFn& fn, std::vector<Tensor> vars) {
    auto rep = finite_diff(fn, std::move(vars));
    worst = std::max(worst, rep.max_rel_err);
    checks += rep.checks;
  };

  auto away_from = [&](Tensor t, double point, double margin) {
    for (double& v : t.data)
      while (std::abs(v - point) < margin) v = rng.uniform(-3.0, 3.0);
    return t;
  };

  for (int trial = 0; trial < 12; ++trial) {
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {3, 4});
    // binary elementwise
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.add(var(g, v, 0), var(g, v, 1)), 1), 0);
    }, {a, b});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.sub(var(g, v, 0), var(g, v, 1)), 1), 0);
    }, {a, b});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.mul(var(g, v, 0), var(g, v, 1)), 1), 0);
    }, {a, b});
    {
      Tensor denom = b;
      for (double& v : denom.data)
        while (std::abs(v) < 0.2) v = rng.uniform(-3.0, 3.0);
      run([](Graph& g, const std::vector<Tensor>& v) {
        return g.reduce_sum(g.reduce_sum(g.div(var(g, v, 0), var(g, v, 1)), 1), 0);
      }, {a, denom});
    }
    {
      // keep |a-b| away from the min/max ties
      Tensor b2 = b;
      for (std::size_t i = 0; i < b2.size(); ++i)
        while (std::abs(a.data[i] - b2.data[i]) < 0.05) b2.data[i] = rng.uniform(-3.0, 3.0);
      run([](Graph& g, const std::vector<Tensor>& v) {
        return g.reduce_sum(g.reduce_sum(g.min(var(g, v, 0), var(g, v, 1)), 1), 0);
      }, {a, b2});
      run([](Graph& g, const std::vector<Tensor>& v) {
        return g.reduce_sum(g.reduce_sum(g.max(var(g, v, 0), var(g, v, 1)), 1), 0);
      }, {a, b2});
      run([](Graph& g, const std::vector<Tensor>& v) {
        return g.reduce_sum(g.reduce_sum(g.step_le(var(g, v, 0), var(g, v, 1)), 1), 0);
      }, {a, b2});
    }
    // unary
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.neg(var(g, v, 0)), 1), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.sigmoid(var(g, v, 0)), 1), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.tanh(var(g, v, 0)), 1), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.exp(var(g, v, 0)), 1), 0);
    }, {random_tensor(rng, {3, 4}, -2.0, 2.0)});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.log(var(g, v, 0)), 1), 0);
    }, {random_tensor(rng, {3, 4}, 0.2, 3.0)});
    run([&](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.relu(var(g, v, 0)), 1), 0);
    }, {away_from(a, 0.0, 0.05)});
    {
      Tensor c = a;
      for (double& v : c.data)
        while (std::abs(v - (-1.0)) < 0.05 || std::abs(v - 1.0) < 0.05)
          v = rng.uniform(-3.0, 3.0);
      run([](Graph& g, const std::vector<Tensor>& v) {
        return g.reduce_sum(g.reduce_sum(g.clamp(var(g, v, 0), -1.0, 1.0), 1), 0);
      }, {c});
    }
    // structure ops
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.matmul(var(g, v, 0), var(g, v, 1)), 1), 0);
    }, {random_tensor(rng, {2, 3}), random_tensor(rng, {3, 2})});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.softmax(var(g, v, 0), 1), 1), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      // weighted so the softmax jacobian is non-trivial
      return g.reduce_sum(g.reduce_sum(g.mul(g.softmax(var(g, v, 0), 1), var(g, v, 1)), 1), 0);
    }, {a, b});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_mean(g.reduce_mean(var(g, v, 0), 1), 0);
    }, {a});
    {
      // separate the per-column maxima
      Tensor c = random_tensor(rng, {4, 3});
      run([](Graph& g, const std::vector<Tensor>& v) {
        return g.reduce_sum(g.reduce_max(var(g, v, 0), 0), 0);
      }, {c});
    }
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.concat({var(g, v, 0), var(g, v, 1)}, 1), 1), 0);
    }, {a, b});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.slice(var(g, v, 0), 1, 2), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reshape(var(g, v, 0), {12}), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      return g.reduce_sum(g.reduce_sum(g.reduce_sum(g.broadcast(var(g, v, 0), {5, 3, 4}), 2), 1), 0);
    }, {a});
    run([](Graph& g, const std::vector<Tensor>& v) {
      // scalar broadcast inside a binary op
      return g.reduce_sum(g.reduce_sum(g.mul(var(g, v, 0), var(g, v, 1)), 1), 0);
    }, {a, Tensor::scalar(rng.uniform(-2, 2))});
  }
  CHECK(checks >= 100);
  CHECK(worst < 1e-4);
}

TEST_CASE("checkpoint round-trips parameters") {
  namespace fs = std::filesystem;
  ParamStore store;
  Rng rng(5);
  store.ensure("model/W0", [&] { return random_tensor(rng, {3, 2}); });
  store.ensure("model/b0", [&] { return random_tensor(rng, {2}); });
  store.ensure("individual/Points/p1", [&] { return random_tensor(rng, {1, 4}); });
  fs::path path = fs::temp_directory_path() / "lyr_ckpt_test.bin";
  save_checkpoint(path.string(), store);
  ParamStore loaded = load_checkpoint(path.string());
  REQUIRE(loaded.count() == store.count());
  for (const auto& [name, t] : store.all()) {
    REQUIRE(loaded.has(name));
    CHECK(loaded.at(name).shape == t.shape);
    CHECK(loaded.at(name).data == t.data);  // bit-exact
  }
  fs::remove(path);
}

TEST_CASE("adam and sgd step shapes stay aligned") {
  ParamStore store;
  store.ensure("w", [] { return Tensor::vector({1.0, -2.0}); });
  GradientTape tape;
  tape.accumulate("w", Tensor::vector({0.5, -0.5}));

  Optimizer sgd({OptKind::Sgd, 0.1});
  sgd.step(store, tape);
  CHECK(store.at("w").data[0] == doctest::Approx(0.95));
  CHECK(store.at("w").data[1] == doctest::Approx(-1.95));

  Optimizer adam({OptKind::Adam, 0.1});
  adam.step(store, tape);  // first adam step moves by ~lr in the grad direction
  CHECK(store.at("w").data[0] == doctest::Approx(0.85).epsilon(1e-3));
}
