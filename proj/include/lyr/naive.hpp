#pragma once

#include "lyr/tnorm.hpp"
#include "lyr/universe.hpp"

namespace lyr {

/// Reference evaluator for a sort-checked formula: explicit nested loops
/// over every grounding with scalar connective arithmetic. No graph, no
/// memoization; deliberately independent of the compiled path so the two
/// can be checked against each other.
///
/// `cap` bounds the total number of grounding tuples.
double naive_eval(const Universe& universe, const ParamStore& params, const Formula& f,
                  const TNormConfig& cfg, std::size_t cap = 100000);

}  // namespace lyr
