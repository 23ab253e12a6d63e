#include "lyr/gradcheck.hpp"

#include <cmath>

namespace lyr {

double objective_value(const Universe& uni, const ParamStore& params, const TrainOptions& opts) {
  ParamStore copy = params;
  Graph g;
  Compiler comp(g, copy, uni, CompileOptions{opts.tnorm, opts.cap});
  ObjectiveBuild built = build_objective(comp, uni, opts.loss, opts.lambda_scale);
  g.forward(built.total);
  return g.value(built.total).item();
}

GradientTape objective_grad(const Universe& uni, ParamStore& params, const TrainOptions& opts) {
  Graph g;
  Compiler comp(g, params, uni, CompileOptions{opts.tnorm, opts.cap});
  ObjectiveBuild built = build_objective(comp, uni, opts.loss, opts.lambda_scale);
  g.forward(built.total);
  return g.backward(built.total);
}

GradCheck gradcheck_objective(const Universe& uni, ParamStore& params, const TrainOptions& opts,
                              std::size_t samples, double h, std::uint64_t seed) {
  uni.materialize_params(params);
  GradientTape tape = objective_grad(uni, params, opts);

  // Sample (parameter, element) slots uniformly over all elements.
  std::vector<std::pair<std::string, std::size_t>> slots;
  for (const auto& [name, t] : params.all())
    for (std::size_t i = 0; i < t.size(); ++i) slots.emplace_back(name, i);
  if (slots.empty()) throw Error("gradcheck: no learnable parameters");

  Rng rng(seed);
  GradCheck out;
  for (std::size_t s = 0; s < samples; ++s) {
    auto [name, i] = slots[rng.index(slots.size())];
    double saved = params.at(name).data[i];
    params.at(name).data[i] = saved + h;
    double up = objective_value(uni, params, opts);
    params.at(name).data[i] = saved - h;
    double down = objective_value(uni, params, opts);
    params.at(name).data[i] = saved;
    double fd = (up - down) / (2.0 * h);
    double an = tape.get_or_zero(name, params.at(name).shape).data[i];
    double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
    ++out.checks;
    if (rel > out.max_rel_err) {
      out.max_rel_err = rel;
      out.worst = name + "[" + std::to_string(i) + "]";
    }
  }
  return out;
}

}  // namespace lyr
