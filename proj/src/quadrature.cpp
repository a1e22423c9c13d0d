#include "gpcm/quadrature.hpp"

#include <cmath>

namespace gpcm {

void QuadratureGrid::validate() const {
  if (nodes.size() != weights.size() || nodes.size() < 2)
    throw invalid_input_error("quadrature grid needs >= 2 matched nodes");
  double sum = 0.0;
  for (size_t q = 0; q < nodes.size(); ++q) {
    if (!std::isfinite(nodes[q]) || !(weights[q] > 0.0))
      throw invalid_input_error("quadrature grid entry invalid");
    if (q > 0 && !(nodes[q] > nodes[q - 1]))
      throw invalid_input_error("quadrature nodes must be strictly increasing");
    sum += weights[q];
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw invalid_input_error("quadrature weights must sum to 1");
}

QuadratureGrid normal_grid(int n, double lo, double hi) {
  if (n < 2 || !(hi > lo))
    throw invalid_input_error("normal_grid needs n >= 2 and hi > lo");
  QuadratureGrid g;
  g.nodes.resize(n);
  g.weights.resize(n);
  const double step = (hi - lo) / (n - 1);
  double sum = 0.0;
  for (int q = 0; q < n; ++q) {
    double x = lo + q * step;
    g.nodes[q] = x;
    g.weights[q] = std::exp(-0.5 * x * x);
    sum += g.weights[q];
  }
  for (int q = 0; q < n; ++q) g.weights[q] /= sum;
  return g;
}

}  // namespace gpcm
