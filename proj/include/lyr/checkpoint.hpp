#pragma once

#include <string>

#include "lyr/params.hpp"

namespace lyr {

// Checkpoint file layout (stable across versions):
//
//   line 1:  "LYRC 1"                      format magic + version
//   line 2:  <n>                           number of parameters
//   n lines: <id> <rank> <d0> <d1> ...     manifest, sorted by parameter id
//   payload: all tensors as little-endian float64, flat row-major,
//            concatenated in manifest order
//
// Parameter ids contain no whitespace.

void save_checkpoint(const std::string& path, const ParamStore& params);
ParamStore load_checkpoint(const std::string& path);

}  // namespace lyr
