#pragma once

#include <string>
#include <vector>

#include "gpcm/quadrature.hpp"
#include "gpcm/types.hpp"

namespace gpcm {

struct EmConfig {
  QuadratureGrid grid;        // default: normal_grid()
  int max_cycles = 500;
  double outer_tol = 1e-4;    // max abs parameter change between cycles
  int newton_max_iter = 20;
  double newton_tol = 1e-8;   // gradient max-norm target in the M-step

  EmConfig();
  void validate() const;
};

struct EStepResult {
  // Per-person posterior node weights, n_persons x n_nodes row-major;
  // each row sums to one.
  std::vector<double> posterior;
  int n_persons = 0;
  int n_nodes = 0;
  // expected_counts[j] is n_nodes x m_j row-major: expected number of
  // responses in category k at node q for item j.
  std::vector<std::vector<double>> expected_counts;
  double marginal_loglik = 0.0;

  double weight(int person, int node) const {
    return posterior[static_cast<size_t>(person) * n_nodes + node];
  }
};

struct MmleFit {
  ItemBank bank_hat;
  std::vector<double> loglik_trace;  // marginal log-likelihood per cycle
  bool converged = false;
  int n_cycles = 0;
  // category_maps[j][k] = fitted category index for observed category k.
  // Identity unless empty categories were collapsed into a neighbor.
  std::vector<std::vector<int>> category_maps;
  std::vector<std::string> warnings;

  // Applies the collapse maps, giving responses on bank_hat's scale.
  ResponseMatrix map_responses(const ResponseMatrix& data) const;
};

struct EapResult {
  ThetaVector theta;
  std::vector<double> sd;  // per-person posterior SD
};

/* Bock-Aitkin E-step.  Person-node likelihoods are accumulated in log
 * space, so long tests do not underflow.  Log terms are rounded to the
 * nearest multiple of 2^-40 and expected counts accumulate as scaled
 * integers, which makes the results exactly invariant to row and column
 * permutations of the data; the rounding is far below every estimation
 * tolerance. */
EStepResult e_step(const ResponseMatrix& data, const ItemBank& bank,
                   const QuadratureGrid& grid);

// Per-item Newton-Raphson on (log a, d_2..d_m) maximizing the expected
// complete-data log-likelihood; ascent is enforced by step-halving and a
// ridge fallback on an indefinite or singular Hessian.
ItemParams m_step_item(const std::vector<double>& expected_counts,
                       const QuadratureGrid& grid, const ItemParams& start,
                       const EmConfig& cfg);

// Marginal maximum likelihood fit of all items under a standard-normal
// latent density discretized on cfg.grid.
MmleFit fit_mmle(const ResponseMatrix& data, const std::vector<int>& m_per_item,
                 const EmConfig& cfg = EmConfig());

// Posterior-mean (EAP) ability scores with per-person posterior SDs.
EapResult eap_abilities(const ResponseMatrix& data, const ItemBank& bank_hat,
                        const QuadratureGrid& grid);

}  // namespace gpcm
