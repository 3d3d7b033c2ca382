#include "dlk/numerics.hpp"

namespace dlk {

Grid2D grid_from_reals(std::size_t ydim, std::size_t xdim,
                       std::span<const float> values) {
  if (values.size() != ydim * xdim) {
    throw ShapeError("grid_from_reals: " + std::to_string(ydim) + "x" +
                     std::to_string(xdim) + " grid needs " +
                     std::to_string(ydim * xdim) + " values, got " +
                     std::to_string(values.size()));
  }
  Grid2D grid(ydim, xdim);
  for (std::size_t i = 0; i < values.size(); ++i) grid[i].real = values[i];
  return grid;
}

}  // namespace dlk
