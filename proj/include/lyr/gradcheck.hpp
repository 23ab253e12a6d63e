#pragma once

#include <string>

#include "lyr/rng.hpp"
#include "lyr/train.hpp"

namespace lyr {

/// Fresh-graph forward pass of the training objective; pure in `params`.
double objective_value(const Universe& uni, const ParamStore& params, const TrainOptions& opts);

/// Reverse-mode gradient of the training objective.
GradientTape objective_grad(const Universe& uni, ParamStore& params, const TrainOptions& opts);

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checks = 0;
  std::string worst;  // "param[i]"
};

/// Central-difference verification of the analytic gradient on randomly
/// sampled parameter elements: rel = |a-f| / max(1, |a|, |f|), f from
/// (J(w+h) - J(w-h)) / 2h. Two forward evaluations per sample; entirely
/// independent of the backward pass it audits.
GradCheck gradcheck_objective(const Universe& uni, ParamStore& params, const TrainOptions& opts,
                              std::size_t samples, double h, std::uint64_t seed);

}  // namespace lyr
