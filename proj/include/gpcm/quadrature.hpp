#pragma once

#include <vector>

#include "gpcm/errors.hpp"

namespace gpcm {

// Latent-trait marginalization grid: strictly increasing nodes with
// positive weights summing to one.
struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  void validate() const;
};

// Equally spaced nodes on [lo, hi] with standard-normal density weights
// renormalized to sum 1.  The default 61-node [-5, 5] grid is the one the
// MMLE estimator uses throughout.
QuadratureGrid normal_grid(int n = 61, double lo = -5.0, double hi = 5.0);

}  // namespace gpcm
