#pragma once

#include <iosfwd>
#include <optional>

#include "lyr/compiler.hpp"
#include "lyr/optimizer.hpp"

namespace lyr {

struct TrainOptions {
  Optimizer::Options opt;
  int epochs = 200;
  LossMode loss = LossMode::Log;
  TNormConfig tnorm;
  std::size_t cap = 10'000'000;
  /// Multiplies every constraint weight; 0 drops the logic terms entirely,
  /// reducing training to the supervised objective.
  double lambda_scale = 1.0;
};

struct EpochRow {
  int epoch = 0;
  double total = 0.0;
  std::vector<double> psis;
  std::vector<double> pw;
};

struct TrainResult {
  std::vector<std::string> constraint_names;
  std::vector<std::string> pw_names;
  std::vector<EpochRow> rows;
};

/// One training-step graph: total loss plus the per-term probes.
struct ObjectiveBuild {
  NodeId total = 0;
  std::vector<GroundedConstraint> constraints;
  struct Pw {
    std::string name;
    NodeId loss = 0;
    double weight = 1.0;
  };
  std::vector<Pw> pointwise;
};

/// Assemble sum_j lambda_j * L(psi_j) + sum_k w_k * pointwise_k on the
/// compiler's graph. Test-only constraints are skipped; so are constraints
/// whose scaled weight is zero.
ObjectiveBuild build_objective(Compiler& comp, const Universe& uni, LossMode loss,
                               double lambda_scale);

/// Full-batch minimization of the objective. The graph is rebuilt every
/// epoch; the log records loss and truth degrees before each step.
/// Aborts with the offending term named if any loss goes non-finite.
/// `warnings` (when given) receives a note if the total loss increases
/// over a 50-epoch window by more than 1e-3.
TrainResult train(const Universe& uni, ParamStore& params, const TrainOptions& opts,
                  std::ostream* warnings = nullptr);

void write_metrics_csv(const std::string& path, const TrainResult& result);

// -- model checking ----------------------------------------------------------

struct CheckOptions {
  TNormConfig tnorm;
  std::size_t cap = 10'000'000;
  bool test_only_only = false;  // restrict to constraints marked test_only
};

struct CheckResult {
  std::string text;
  bool test_only = false;
  double psi = 0.0;
};

/// Evaluate constraint truth degrees against frozen parameters. Pure: the
/// caller's store is copied, never written.
std::vector<CheckResult> model_check(const Universe& uni, const ParamStore& params,
                                     const CheckOptions& opts);

// -- collective inference ------------------------------------------------------

struct CollectiveOptions {
  int steps = 500;
  Optimizer::Options opt{OptKind::Adam, 5e-2, 0.9, 0.999, 1e-8};
  LossMode loss = LossMode::Log;
  TNormConfig tnorm;
  std::size_t cap = 10'000'000;
  double prior_weight = 1.0;
};

struct CollectiveResult {
  std::vector<std::string> predicates;
  std::map<std::string, std::vector<double>> priors;
  std::map<std::string, std::vector<double>> adjusted;
  std::vector<CheckResult> psi_before;
  std::vector<CheckResult> psi_after;
  TrainResult log;
};

/// Inference-time adjustment: every learnable unary predicate is replaced
/// by fresh per-row truth values initialized at the frozen model's
/// predictions, then optimized to satisfy the constraints while staying
/// close to those priors (cross-entropy against them). Model parameters
/// are never touched.
CollectiveResult collective_infer(const Universe& uni, const ParamStore& frozen,
                                  const CollectiveOptions& opts);

// -- DNF rule ranking -----------------------------------------------------------

struct DnfOptions {
  TNormConfig tnorm;
  std::size_t cap = 10'000'000;
  std::size_t max_formulas = 4096;
};

struct DnfEntry {
  std::string text;
  double truth = 0.0;
  std::size_t minterms = 0;
  bool tautology = false;  // the complete minterm set; listed after the rest
};

/// All universally quantified single-variable DNF formulas over the given
/// unary predicates: each disjunct assigns every predicate a polarity, and
/// candidates are the nonempty subsets of those minterms. Evaluated via
/// model_check and sorted by truth degree; the complete (vacuously true)
/// disjunction ranks last.
std::vector<DnfEntry> enumerate_dnf_checks(const Universe& uni, const ParamStore& params,
                                           const std::vector<std::string>& predicates,
                                           const DnfOptions& opts);

}  // namespace lyr
