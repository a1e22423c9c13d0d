#include "gpcm/model.hpp"

#include <algorithm>
#include <cmath>

namespace gpcm {

void NrmParams::validate() const {
  if (slopes.size() != intercepts.size() || slopes.size() < 2)
    throw invalid_input_error("NRM parameter vectors must match, length >= 2");
  if (slopes[0] != 0.0 || intercepts[0] != 0.0)
    throw invalid_input_error("NRM reference category must have zero slope "
                              "and intercept");
  for (size_t k = 0; k < slopes.size(); ++k)
    if (!std::isfinite(slopes[k]) || !std::isfinite(intercepts[k]))
      throw invalid_input_error("NRM parameter is not finite");
}

namespace detail {

void gpcm_logits_probs(double theta, double a, std::span<const double> steps,
                       std::span<double> logits, std::span<double> probs) {
  const int m = static_cast<int>(steps.size()) + 1;
  logits[0] = 0.0;
  double t = 0.0;
  double tmax = 0.0;
  for (int k = 1; k < m; ++k) {
    t += a * (theta - steps[k - 1]);
    logits[k] = t;
    if (t > tmax) tmax = t;
  }
  double z = 0.0;
  for (int k = 0; k < m; ++k) {
    double e = std::exp(logits[k] - tmax);
    probs[k] = e;
    z += e;
  }
  double inv = 1.0 / z;
  for (int k = 0; k < m; ++k) probs[k] *= inv;
}

}  // namespace detail

void gpcm_category_probs(double theta, const ItemParams& item,
                         std::span<double> out) {
  if (!std::isfinite(theta))
    throw invalid_input_error("theta is not finite");
  item.validate();
  if (out.size() != static_cast<size_t>(item.n_categories()))
    throw invalid_input_error("output span size != n_categories");
  std::vector<double> logits(item.n_categories());
  detail::gpcm_logits_probs(theta, item.discrimination, item.steps, logits,
                            out);
}

std::vector<double> gpcm_category_probs(double theta, const ItemParams& item) {
  std::vector<double> out(item.n_categories());
  gpcm_category_probs(theta, item, out);
  return out;
}

double gpcm_log_likelihood(const ResponseMatrix& data, const ItemBank& bank,
                           const ThetaVector& thetas) {
  bank.validate();
  validate_thetas(thetas);
  if (data.n_items != bank.n_items())
    throw invalid_input_error("response matrix and bank disagree on item count");
  if (static_cast<int>(thetas.size()) != data.n_persons)
    throw invalid_input_error("theta vector length != n_persons");
  data.validate(categories_per_item(bank));

  int max_m = 0;
  for (const auto& it : bank.items) max_m = std::max(max_m, it.n_categories());
  std::vector<double> logits(max_m), probs(max_m);

  double total = 0.0;
  for (int i = 0; i < data.n_persons; ++i) {
    for (int j = 0; j < data.n_items; ++j) {
      const auto& it = bank.items[j];
      const int m = it.n_categories();
      detail::gpcm_logits_probs(thetas[i], it.discrimination, it.steps,
                                {logits.data(), (size_t)m},
                                {probs.data(), (size_t)m});
      total += std::log(probs[data(i, j)]);
    }
  }
  return total;
}

NrmParams gpcm_to_nrm(const ItemParams& item) {
  item.validate();
  const int m = item.n_categories();
  NrmParams out;
  out.slopes.resize(m);
  out.intercepts.resize(m);
  double cum = 0.0;
  out.slopes[0] = 0.0;
  out.intercepts[0] = 0.0;
  for (int k = 1; k < m; ++k) {
    cum += item.steps[k - 1];
    out.slopes[k] = item.discrimination * k;
    out.intercepts[k] = -item.discrimination * cum;
  }
  return out;
}

std::vector<double> nrm_category_probs(double theta, const NrmParams& params) {
  if (!std::isfinite(theta))
    throw invalid_input_error("theta is not finite");
  params.validate();
  const int m = params.n_categories();
  std::vector<double> logits(m), probs(m);
  double tmax = -HUGE_VAL;
  for (int k = 0; k < m; ++k) {
    logits[k] = params.slopes[k] * theta + params.intercepts[k];
    tmax = std::max(tmax, logits[k]);
  }
  double z = 0.0;
  for (int k = 0; k < m; ++k) {
    probs[k] = std::exp(logits[k] - tmax);
    z += probs[k];
  }
  for (int k = 0; k < m; ++k) probs[k] /= z;
  return probs;
}

/* With cumulative logits t_k (t_1 = 0):
 *   d log p_u / d log a = t_u - E[t]
 *   d log p_u / d d_h   = -a * (1[h <= u] - P(K >= h)),  h = 2..m
 * where expectations are over the category distribution at theta. */
std::vector<double> grad_item_loglik(double theta, const ItemParams& item,
                                     int response) {
  if (!std::isfinite(theta))
    throw invalid_input_error("theta is not finite");
  item.validate();
  const int m = item.n_categories();
  if (response < 0 || response >= m)
    throw invalid_input_error("response out of range for item");

  std::vector<double> logits(m), probs(m);
  detail::gpcm_logits_probs(theta, item.discrimination, item.steps, logits,
                            probs);

  std::vector<double> grad(m);  // (log a, d_2..d_m)
  double et = 0.0;
  for (int k = 0; k < m; ++k) et += probs[k] * logits[k];
  grad[0] = logits[response] - et;

  // tail[h] = P(K >= h) for 1-based h = 2..m
  double tail = 0.0;
  for (int k = m - 1; k >= 1; --k) {
    tail += probs[k];
    double ind = (k <= response) ? 1.0 : 0.0;
    grad[k] = -item.discrimination * (ind - tail);
  }
  return grad;
}

double grad_theta_loglik(double theta, const ItemBank& bank,
                         std::span<const int> responses) {
  if (!std::isfinite(theta))
    throw invalid_input_error("theta is not finite");
  if (responses.size() != static_cast<size_t>(bank.n_items()))
    throw invalid_input_error("response row length != bank size");

  int max_m = 0;
  for (const auto& it : bank.items) max_m = std::max(max_m, it.n_categories());
  std::vector<double> logits(max_m), probs(max_m);

  double g = 0.0;
  for (int j = 0; j < bank.n_items(); ++j) {
    const auto& it = bank.items[j];
    it.validate();
    const int m = it.n_categories();
    const int u = responses[j];
    if (u < 0 || u >= m)
      throw invalid_input_error("response out of range for item " +
                                std::to_string(j + 1));
    detail::gpcm_logits_probs(theta, it.discrimination, it.steps,
                              {logits.data(), (size_t)m},
                              {probs.data(), (size_t)m});
    // d t_k / d theta = a * (k - 1) with 0-based k
    double ek = 0.0;
    for (int k = 1; k < m; ++k) ek += probs[k] * k;
    g += it.discrimination * (u - ek);
  }
  return g;
}

}  // namespace gpcm
