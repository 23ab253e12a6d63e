#include "lyr/optimizer.hpp"

#include <cmath>

namespace lyr {

OptKind parse_opt_kind(const std::string& s) {
  if (s == "sgd") return OptKind::Sgd;
  if (s == "adam") return OptKind::Adam;
  throw Error("unknown optimizer '" + s + "' (expected sgd or adam)");
}

void Optimizer::step(ParamStore& params, const GradientTape& tape) {
  ++t_;
  for (auto& [name, value] : params.all()) {
    const Tensor* g = tape.find(name);
    if (!g) continue;  // untouched parameters have zero gradient: no update
    if (!same_shape(g->shape, value.shape))
      throw Error("optimizer: gradient shape mismatch for '" + name + "'");
    if (opts_.kind == OptKind::Sgd) {
      for (std::size_t i = 0; i < value.data.size(); ++i)
        value.data[i] -= opts_.lr * g->data[i];
      continue;
    }
    auto it = slots_.find(name);
    if (it == slots_.end())
      it = slots_.emplace(name, Slot{Tensor::zeros(value.shape), Tensor::zeros(value.shape)})
               .first;
    Slot& s = it->second;
    const double b1 = opts_.beta1, b2 = opts_.beta2;
    const double bc1 = 1.0 - std::pow(b1, t_);
    const double bc2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      double gi = g->data[i];
      s.m.data[i] = b1 * s.m.data[i] + (1.0 - b1) * gi;
      s.v.data[i] = b2 * s.v.data[i] + (1.0 - b2) * gi * gi;
      double mhat = s.m.data[i] / bc1;
      double vhat = s.v.data[i] / bc2;
      value.data[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

}  // namespace lyr
