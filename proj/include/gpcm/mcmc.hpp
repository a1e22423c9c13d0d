#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gpcm/rng.hpp"
#include "gpcm/types.hpp"

namespace gpcm {

/* Priors of the Bayesian GPCM:
 *   theta_i   ~ N(0, 1)
 *   a_j       ~ lognormal(0, 1)      (sampled as log a with N(0,1))
 *   d_jk      ~ N(mu_b, sigma_b)     (one shared pair across all steps)
 *   mu_b      ~ N(0, 5)
 *   sigma_b   ~ half-Cauchy(0, 5)    (sampled as log sigma)
 */
struct PriorSpec {
  double theta_sd = 1.0;
  double log_a_sd = 1.0;
  double step_mu_hyper_sd = 5.0;
  double step_sigma_hyper_scale = 5.0;

  void validate() const;
};

struct HmcConfig {
  int n_chains = 3;
  int iters_per_chain = 600;
  int warmup = 300;
  double target_accept = 0.8;
  int leapfrog_min = 5;
  int leapfrog_max = 15;  // leapfrog count drawn uniformly per iteration
  uint64_t seed = 0;
  double psrf_cutoff = 1.05;
  int max_retries = 8;

  void validate() const;
};

// Retained multi-chain draws on the constrained scale.  Parameter names
// follow the scheme a[j], b[j,k] (k = 2..m, matching the step subscript),
// theta[i], mu_b, sigma_b; indices are 1-based.
struct PosteriorDraws {
  std::vector<std::string> names;
  int n_chains = 0;
  int n_retained = 0;  // per chain
  std::vector<double> values;  // chain-major: chains x retained x n_params

  int n_params() const { return static_cast<int>(names.size()); }
  double at(int chain, int iter, int param) const {
    return values[(static_cast<size_t>(chain) * n_retained + iter) *
                      names.size() +
                  param];
  }
  // All retained draws of one parameter for one chain.
  std::vector<double> chain_draws(int chain, int param) const;
};

struct McmcFit {
  ItemBank bank_hat;        // posterior means
  ThetaVector theta_hat;    // posterior means
  double mu_b_hat = 0.0;
  double sigma_b_hat = 0.0;
  PosteriorDraws draws;
  std::vector<double> psrf;         // per parameter, aligned with draws.names
  int n_retries = 0;
  std::vector<double> accept_rate;  // per chain, post-warmup
  std::vector<double> step_size;    // per chain, adapted epsilon
};

/* Joint posterior over the unconstrained state
 *   [ log a (J) | steps (sum of m_j - 1) | theta (N) | mu_b | log sigma_b ]
 * including the Jacobian terms for log a and log sigma.  A non-finite
 * state evaluates to -inf with a zero gradient. */
class GpcmPosterior {
 public:
  GpcmPosterior(const ResponseMatrix& data, std::vector<int> m_per_item,
                PriorSpec prior);

  int dim() const { return dim_; }
  int n_items() const { return n_items_; }
  int n_persons() const { return data_.n_persons; }
  int n_steps() const { return n_steps_; }

  double log_density(std::span<const double> state) const;
  // Returns the log density and fills grad (same length as state).
  double log_density_grad(std::span<const double> state,
                          std::span<double> grad) const;

  // Names on the constrained scale, aligned with the state layout.
  std::vector<std::string> parameter_names() const;
  // Maps an unconstrained state to the constrained scale in place:
  // log a -> a, log sigma -> sigma; other coordinates unchanged.
  void constrain(std::span<const double> state, std::span<double> out) const;

  ItemBank state_to_bank(std::span<const double> state) const;

  int log_a_offset() const { return 0; }
  int steps_offset() const { return n_items_; }
  int theta_offset() const { return n_items_ + n_steps_; }
  int mu_offset() const { return dim_ - 2; }
  int log_sigma_offset() const { return dim_ - 1; }

 private:
  ResponseMatrix data_;
  std::vector<int> m_per_item_;
  PriorSpec prior_;
  int n_items_ = 0;
  int n_steps_ = 0;
  int dim_ = 0;
  std::vector<int> step_offset_;  // per item, into the steps block
};

using LogDensityGrad =
    std::function<double(std::span<const double>, std::span<double>)>;

struct HmcChainResult {
  std::vector<double> draws;  // retained x dim, unconstrained scale
  int n_retained = 0;
  int dim = 0;
  double accept_rate = 0.0;   // post-warmup mean acceptance probability
  double step_size = 0.0;     // epsilon after adaptation
};

/* One HMC chain: identity mass matrix, leapfrog count jittered uniformly
 * in [leapfrog_min, leapfrog_max], dual-averaging step-size adaptation
 * toward target_accept during warmup (Hoffman-Gelman schedule), fixed
 * step size afterwards. */
HmcChainResult run_hmc_chain(const LogDensityGrad& target, int dim,
                             std::span<const double> init, int iters,
                             int warmup, double target_accept,
                             int leapfrog_min, int leapfrog_max, Rng& rng);

// Gelman-Rubin PSRF: sqrt(((n-1)/n * W + B/n) / W).  Needs >= 2 chains
// of equal length n >= 2 and nonzero within-chain variance.
double psrf(const std::vector<std::vector<double>>& chains);

/* Full Bayesian fit: runs cfg.n_chains chains, checks PSRF on every
 * parameter, and re-estimates from a derived seed until all PSRF values
 * fall below cfg.psrf_cutoff (up to cfg.max_retries).  Point estimates
 * are posterior means over all retained draws. */
McmcFit fit_mcmc(const ResponseMatrix& data, const std::vector<int>& m_per_item,
                 const PriorSpec& prior = PriorSpec(),
                 const HmcConfig& cfg = HmcConfig());

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;    // sample SD, n-1 divisor
  double q5 = 0.0;    // central 90% interval bounds
  double q95 = 0.0;
};

std::vector<SummaryRow> posterior_summaries(const PosteriorDraws& draws);

}  // namespace gpcm
