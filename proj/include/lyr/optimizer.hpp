#pragma once

#include <map>
#include <string>

#include "lyr/graph.hpp"
#include "lyr/params.hpp"

namespace lyr {

enum class OptKind { Sgd, Adam };

OptKind parse_opt_kind(const std::string& s);

/// Full-batch gradient-descent optimizer over a ParamStore.
/// Moment slots are created lazily per parameter and always match its shape.
class Optimizer {
 public:
  struct Options {
    OptKind kind = OptKind::Adam;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Optimizer(Options opts) : opts_(opts) {}

  void step(ParamStore& params, const GradientTape& tape);

  int steps_taken() const { return t_; }
  const Options& options() const { return opts_; }

 private:
  struct Slot {
    Tensor m, v;
  };
  Options opts_;
  std::map<std::string, Slot> slots_;
  int t_ = 0;
};

}  // namespace lyr
