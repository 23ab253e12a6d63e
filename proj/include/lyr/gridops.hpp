#pragma once

#include <vector>

#include "lyr/graph.hpp"

namespace lyr {

/// Number of grounding tuples in a grid (1 for the empty grid).
std::size_t grid_count(const std::vector<std::size_t>& grid);

/// Tile domain rows [n, r] over a grounding grid so that the block's i-th
/// row is the domain row selected by the grid coordinate along `axis` of
/// the i-th tuple (row-major tuple order). Result [N, r].
NodeId tile_rows_for_axis(Graph& g, NodeId rows, const std::vector<std::size_t>& grid, int axis);

/// Same for a vector [n] -> [N].
NodeId tile_vec_for_axis(Graph& g, NodeId vec, const std::vector<std::size_t>& grid, int axis);

/// Reshape a flat [N] block to its grid shape ([] for the empty grid).
NodeId grid_unflatten(Graph& g, NodeId flat, const std::vector<std::size_t>& grid);

/// Expand a value laid out over a subset of the scope axes to the full
/// scope grid. `own_axes` lists, in order, which scope axis each of the
/// value's axes corresponds to.
NodeId expand_to_scope(Graph& g, NodeId value, const std::vector<int>& own_axes,
                       const std::vector<std::size_t>& scope);

}  // namespace lyr
