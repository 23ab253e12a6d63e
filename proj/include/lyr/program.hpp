#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lyr/ast.hpp"

namespace lyr {

enum class PwLoss { CrossEntropy, SquaredError };
PwLoss parse_pw_loss(const std::string& s);

struct MlpDecl {
  std::vector<std::size_t> hidden;
  std::string activation = "tanh";
  std::string output = "sigmoid";
  std::uint64_t seed = 0;
};

/// How a predicate or function is realized.
struct ImplDecl {
  enum class Kind { Mlp, Slice, Given };
  Kind kind = Kind::Mlp;
  MlpDecl mlp;
  std::string slice_learner;
  std::size_t slice_index = 0;
  std::string given_name;
  std::map<std::string, std::string> given_params;
};

struct DomainStanza {
  std::string name;
  std::string csv;                             // file relative to the data dir
  std::vector<std::vector<double>> inline_rows;
  bool is_inline = false;
  SourceSpan span;
};

struct IndividualStanza {
  std::string name;
  std::string domain;
  std::vector<double> value;  // empty when learnable
  bool learnable = false;
  SourceSpan span;
};

struct LearnerStanza {
  std::string name;
  std::vector<std::string> input_domains;
  std::size_t out_width = 1;
  MlpDecl mlp;
  SourceSpan span;
};

struct PredicateStanza {
  std::string name;
  std::vector<std::string> domains;
  ImplDecl impl;
  SourceSpan span;
};

struct FunctionStanza {
  std::string name;
  std::vector<std::string> domains;
  std::string out_domain;
  ImplDecl impl;
  SourceSpan span;
};

struct ConstraintStanza {
  std::string text;                 // formula exactly as written
  std::unique_ptr<Formula> ast;     // parsed, not yet sort-checked
  double weight = 1.0;
  bool test_only = false;
  SourceSpan span;
};

struct PointwiseStanza {
  std::string symbol;  // predicate or learner name
  std::string inputs_csv;
  std::string labels_csv;
  double weight = 1.0;
  PwLoss loss = PwLoss::CrossEntropy;
  SourceSpan span;
};

/// A parsed program file: declarations in source order, names already
/// checked for uniqueness and forward references.
struct ProgramDecl {
  std::vector<DomainStanza> domains;
  std::vector<IndividualStanza> individuals;
  std::vector<LearnerStanza> learners;
  std::vector<PredicateStanza> predicates;
  std::vector<FunctionStanza> functions;
  std::vector<ConstraintStanza> constraints;
  std::vector<PointwiseStanza> pointwise;
};

}  // namespace lyr
