#include "lyr/gridops.hpp"

namespace lyr {

std::size_t grid_count(const std::vector<std::size_t>& grid) {
  std::size_t n = 1;
  for (std::size_t d : grid) n *= d;
  return n;
}

NodeId tile_rows_for_axis(Graph& g, NodeId rows, const std::vector<std::size_t>& grid, int axis) {
  const Shape& s = g.shape(rows);
  if (s.size() != 2) throw Error("tile_rows_for_axis: expected [n,r] rows");
  const std::size_t r = s[1];
  Shape with_ones(grid.size() + 1, 1);
  with_ones[axis] = grid[axis];
  with_ones.back() = r;
  Shape target(grid.begin(), grid.end());
  target.push_back(r);
  NodeId shaped = g.reshape(rows, with_ones);
  NodeId tiled = g.broadcast(shaped, target);
  return g.reshape(tiled, Shape{grid_count(grid), r});
}

NodeId tile_vec_for_axis(Graph& g, NodeId vec, const std::vector<std::size_t>& grid, int axis) {
  const Shape& s = g.shape(vec);
  if (s.size() != 1) throw Error("tile_vec_for_axis: expected [n] vector");
  Shape with_ones(grid.size(), 1);
  with_ones[axis] = grid[axis];
  NodeId shaped = g.reshape(vec, with_ones);
  NodeId tiled = g.broadcast(shaped, Shape(grid.begin(), grid.end()));
  return g.reshape(tiled, Shape{grid_count(grid)});
}

NodeId grid_unflatten(Graph& g, NodeId flat, const std::vector<std::size_t>& grid) {
  return g.reshape(flat, Shape(grid.begin(), grid.end()));
}

NodeId expand_to_scope(Graph& g, NodeId value, const std::vector<int>& own_axes,
                       const std::vector<std::size_t>& scope) {
  Shape with_ones(scope.size(), 1);
  for (std::size_t i = 0; i < own_axes.size(); ++i) with_ones[own_axes[i]] = scope[own_axes[i]];
  NodeId shaped = g.reshape(value, with_ones);
  if (with_ones == Shape(scope.begin(), scope.end())) return shaped;
  return g.broadcast(shaped, Shape(scope.begin(), scope.end()));
}

}  // namespace lyr
