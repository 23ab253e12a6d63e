#pragma once

#include <string>

#include "lyr/graph.hpp"

namespace lyr {

enum class TNormFamily { Product, Lukasiewicz, Goedel };

TNormFamily parse_tnorm(const std::string& s);
std::string to_string(TNormFamily f);

struct TNormConfig {
  TNormFamily family = TNormFamily::Product;
  double epsilon = 1e-12;  // guards divisions and logarithms
};

// Elementwise connectives over truth tensors in [0,1]. Implications keep
// the case form (x <= y ? 1 : f(x,y)) via a gradient-free indicator, so
// Boolean corners evaluate exactly and the satisfied branch contributes
// no gradient. Inputs are assumed in [0,1]; truth sources are checked at
// evaluation time by the compiler's assert_unit wrapping.
NodeId tnorm_and(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg);
NodeId tnorm_or(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg);
NodeId tnorm_not(Graph& g, NodeId x, const TNormConfig& cfg);
NodeId tnorm_implies(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg);
/// Lowered as and(implies(x,y), implies(y,x)).
NodeId tnorm_iff(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg);

/// Universal quantifier: arithmetic mean over the quantified axis.
NodeId quantify_forall(Graph& g, NodeId values, int axis);
/// Existential quantifier: maximum over the quantified axis.
NodeId quantify_exists(Graph& g, NodeId values, int axis);

enum class LossMode { Linear, Log };
LossMode parse_loss_mode(const std::string& s);
std::string to_string(LossMode m);

/// Monotonically decreasing satisfaction-to-loss map over a scalar truth
/// degree: linear -> 1 - psi, log -> -log(max(psi, eps)).
NodeId loss_transform(Graph& g, NodeId psi, LossMode mode, double eps = 1e-12);

}  // namespace lyr
