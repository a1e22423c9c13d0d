#pragma once

#include <span>
#include <vector>

#include "gpcm/types.hpp"

namespace gpcm {

// Per-category slope/intercept parameterization (multinomial logit form).
// First slope and first intercept are zero (reference category).
struct NrmParams {
  std::vector<double> slopes;
  std::vector<double> intercepts;

  int n_categories() const { return static_cast<int>(slopes.size()); }
  void validate() const;
};

/* Category probabilities for one item at one theta.
 *
 * Internally the cumulative logits are
 *   t_1 = 0,   t_k = t_{k-1} + a*(theta - d_k)   for k = 2..m,
 * and the probabilities are softmax(t) computed with max-subtraction, so
 * the result is a valid simplex for any finite inputs (theta = +-35,
 * a = 3 included).  t differs from the textbook cumulative sum only by
 * the constant a*theta, which cancels in the softmax.
 */
std::vector<double> gpcm_category_probs(double theta, const ItemParams& item);

// In-place variant; out.size() must equal item.n_categories().
void gpcm_category_probs(double theta, const ItemParams& item,
                         std::span<double> out);

// Joint log-likelihood sum_ij log P(u_ij | theta_i, item_j).
double gpcm_log_likelihood(const ResponseMatrix& data, const ItemBank& bank,
                           const ThetaVector& thetas);

// Constrained-slope mapping: slopes a*(k-1), intercepts -a*cumsum(steps).
// nrm_category_probs of the result reproduces gpcm_category_probs exactly.
NrmParams gpcm_to_nrm(const ItemParams& item);

std::vector<double> nrm_category_probs(double theta, const NrmParams& params);

// d log P(u=response) / d (log a, d_2..d_m) for one item at one theta.
// Response is 0-based.  Gradients are with respect to log a so the
// positivity constraint never needs boundary handling.
std::vector<double> grad_item_loglik(double theta, const ItemParams& item,
                                     int response);

// d/dtheta of one person's log-likelihood across a bank.
double grad_theta_loglik(double theta, const ItemBank& bank,
                         std::span<const int> responses);

namespace detail {

/* Workhorse used by the public functions and both estimators: fills
 * probs[0..m-1] for one item at one theta; logits[] receives the
 * cumulative logits t_k (t_1 = 0).  Both spans must have size m.  No
 * validation; callers guarantee finite inputs and matching sizes. */
void gpcm_logits_probs(double theta, double a, std::span<const double> steps,
                       std::span<double> logits, std::span<double> probs);

}  // namespace detail

}  // namespace gpcm
