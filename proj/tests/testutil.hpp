#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lyr/graph.hpp"
#include "lyr/rng.hpp"

namespace lyrtest {

using lyr::Graph;
using lyr::NodeId;
using lyr::ParamStore;
using lyr::Shape;
using lyr::Tensor;

// Builds a fresh graph around the given variables and returns the scalar
// output; used to evaluate the same function at perturbed points.
using ScalarFn = std::function<NodeId(Graph&, const std::vector<Tensor>&)>;

inline double eval_scalar(const ScalarFn& fn, const std::vector<Tensor>& vars) {
  Graph g;
  NodeId out = fn(g, vars);
  g.forward(out);
  return g.value(out).item();
}

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t checks = 0;
};

// Central-difference check of d(out)/d(vars) against backward().
// rel = |analytic - fd| / max(1, |analytic|, |fd|).
inline FdReport finite_diff(const ScalarFn& fn, std::vector<Tensor> vars, double h = 1e-5) {
  Graph g;
  NodeId out = fn(g, vars);
  g.forward(out);
  lyr::GradientTape tape = g.backward(out);

  FdReport rep;
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const std::string name = "v" + std::to_string(v);
    Tensor analytic = tape.get_or_zero(name, vars[v].shape);
    for (std::size_t i = 0; i < vars[v].size(); ++i) {
      double saved = vars[v].data[i];
      vars[v].data[i] = saved + h;
      double up = eval_scalar(fn, vars);
      vars[v].data[i] = saved - h;
      double down = eval_scalar(fn, vars);
      vars[v].data[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double an = analytic.data[i];
      double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      ++rep.checks;
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
    }
  }
  return rep;
}

// Convention used with finite_diff: fn must create its inputs via
// g.variable("v<i>", vars[i]) so the tape keys line up.
inline NodeId var(Graph& g, const std::vector<Tensor>& vars, std::size_t i) {
  return g.variable("v" + std::to_string(i), vars[i]);
}

inline Tensor random_tensor(lyr::Rng& rng, Shape shape, double lo = -3.0, double hi = 3.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace lyrtest
