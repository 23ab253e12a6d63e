#include "lyr/tnorm.hpp"

namespace lyr {

TNormFamily parse_tnorm(const std::string& s) {
  if (s == "product") return TNormFamily::Product;
  if (s == "lukasiewicz") return TNormFamily::Lukasiewicz;
  if (s == "goedel" || s == "godel") return TNormFamily::Goedel;
  throw Error("unknown t-norm family '" + s + "' (expected product, lukasiewicz or goedel)");
}

std::string to_string(TNormFamily f) {
  switch (f) {
    case TNormFamily::Product: return "product";
    case TNormFamily::Lukasiewicz: return "lukasiewicz";
    case TNormFamily::Goedel: return "goedel";
  }
  return "?";
}

NodeId tnorm_and(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg) {
  switch (cfg.family) {
    case TNormFamily::Product:
      return g.mul(x, y);
    case TNormFamily::Lukasiewicz:
      return g.max(g.sub(g.add(x, y), g.scalar(1.0)), g.scalar(0.0));
    case TNormFamily::Goedel:
      return g.min(x, y);
  }
  throw Error("tnorm_and: bad family");
}

NodeId tnorm_or(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg) {
  switch (cfg.family) {
    case TNormFamily::Product:
      return g.sub(g.add(x, y), g.mul(x, y));
    case TNormFamily::Lukasiewicz:
      return g.min(g.add(x, y), g.scalar(1.0));
    case TNormFamily::Goedel:
      return g.max(x, y);
  }
  throw Error("tnorm_or: bad family");
}

NodeId tnorm_not(Graph& g, NodeId x, const TNormConfig&) {
  return g.sub(g.scalar(1.0), x);
}

NodeId tnorm_implies(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg) {
  switch (cfg.family) {
    case TNormFamily::Product: {
      // x <= y ? 1 : y/x, with the divisor floored at epsilon.
      NodeId sat = g.step_le(x, y);
      NodeId ratio = g.div(y, g.max(x, g.scalar(cfg.epsilon)));
      return g.add(sat, g.mul(g.sub(g.scalar(1.0), sat), ratio));
    }
    case TNormFamily::Lukasiewicz:
      return g.min(g.add(g.sub(g.scalar(1.0), x), y), g.scalar(1.0));
    case TNormFamily::Goedel: {
      // x <= y ? 1 : y
      NodeId sat = g.step_le(x, y);
      return g.add(sat, g.mul(g.sub(g.scalar(1.0), sat), y));
    }
  }
  throw Error("tnorm_implies: bad family");
}

NodeId tnorm_iff(Graph& g, NodeId x, NodeId y, const TNormConfig& cfg) {
  return tnorm_and(g, tnorm_implies(g, x, y, cfg), tnorm_implies(g, y, x, cfg), cfg);
}

NodeId quantify_forall(Graph& g, NodeId values, int axis) {
  return g.reduce_mean(values, axis);
}

NodeId quantify_exists(Graph& g, NodeId values, int axis) {
  return g.reduce_max(values, axis);
}

LossMode parse_loss_mode(const std::string& s) {
  if (s == "linear") return LossMode::Linear;
  if (s == "log") return LossMode::Log;
  throw Error("unknown loss mode '" + s + "' (expected linear or log)");
}

std::string to_string(LossMode m) {
  return m == LossMode::Linear ? "linear" : "log";
}

NodeId loss_transform(Graph& g, NodeId psi, LossMode mode, double eps) {
  switch (mode) {
    case LossMode::Linear:
      return g.sub(g.scalar(1.0), psi);
    case LossMode::Log:
      return g.neg(g.log(g.max(psi, g.scalar(eps))));
  }
  throw Error("loss_transform: bad mode");
}

}  // namespace lyr
