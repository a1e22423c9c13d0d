#include "gpcm/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gpcm/errors.hpp"
#include "gpcm/model.hpp"

namespace gpcm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal_pdf(double x, double mu, double sd) {
  double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

}  // namespace

void PriorSpec::validate() const {
  auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!pos(theta_sd) || !pos(log_a_sd) || !pos(step_mu_hyper_sd) ||
      !pos(step_sigma_hyper_scale))
    throw invalid_input_error("prior scales must be finite and > 0");
}

void HmcConfig::validate() const {
  if (n_chains < 2) throw invalid_input_error("need at least 2 chains");
  if (warmup < 1) throw invalid_input_error("warmup must be >= 1");
  if (iters_per_chain <= warmup)
    throw invalid_input_error("iters_per_chain must exceed warmup");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw invalid_input_error("target_accept must lie in (0, 1)");
  if (leapfrog_min < 1 || leapfrog_max < leapfrog_min)
    throw invalid_input_error("leapfrog range is invalid");
  if (!(psrf_cutoff > 1.0))
    throw invalid_input_error("psrf_cutoff must be > 1");
  if (max_retries < 0) throw invalid_input_error("max_retries must be >= 0");
}

std::vector<double> PosteriorDraws::chain_draws(int chain, int param) const {
  std::vector<double> out(n_retained);
  for (int t = 0; t < n_retained; ++t) out[t] = at(chain, t, param);
  return out;
}

GpcmPosterior::GpcmPosterior(const ResponseMatrix& data,
                             std::vector<int> m_per_item, PriorSpec prior)
    : data_(data), m_per_item_(std::move(m_per_item)), prior_(prior) {
  prior_.validate();
  // Zero items is allowed: the posterior is then the joint prior over
  // thetas and the step hyperparameters (used by prior-recovery checks).
  for (int m : m_per_item_)
    if (m < 2) throw invalid_input_error("every item needs >= 2 categories");
  data_.validate(m_per_item_);

  n_items_ = data_.n_items;
  step_offset_.resize(n_items_);
  n_steps_ = 0;
  for (int j = 0; j < n_items_; ++j) {
    step_offset_[j] = n_steps_;
    n_steps_ += m_per_item_[j] - 1;
  }
  dim_ = n_items_ + n_steps_ + data_.n_persons + 2;
}

double GpcmPosterior::log_density(std::span<const double> state) const {
  std::vector<double> scratch(dim_);
  return log_density_grad(state, scratch);
}

double GpcmPosterior::log_density_grad(std::span<const double> state,
                                       std::span<double> grad) const {
  if (state.size() != static_cast<size_t>(dim_) ||
      grad.size() != static_cast<size_t>(dim_))
    throw invalid_input_error("state/grad size does not match the posterior");

  std::fill(grad.begin(), grad.end(), 0.0);
  for (double v : state)
    if (!std::isfinite(v)) return kNegInf;

  const int nj = n_items_;
  const int n = data_.n_persons;
  const double* log_a = state.data() + log_a_offset();
  const double* steps = state.data() + steps_offset();
  const double* theta = state.data() + theta_offset();
  const double mu_b = state[mu_offset()];
  const double log_sigma = state[log_sigma_offset()];
  const double sigma = std::exp(log_sigma);
  if (!std::isfinite(sigma) || sigma <= 0.0) return kNegInf;

  double* g_log_a = grad.data() + log_a_offset();
  double* g_steps = grad.data() + steps_offset();
  double* g_theta = grad.data() + theta_offset();

  int max_m = 2;
  for (int m : m_per_item_) max_m = std::max(max_m, m);
  std::vector<double> logits(max_m), probs(max_m);

  double lp = 0.0;
  for (int j = 0; j < nj; ++j) {
    const int m = m_per_item_[j];
    const double a = std::exp(log_a[j]);
    if (!std::isfinite(a)) return kNegInf;
    std::span<const double> st(steps + step_offset_[j],
                               static_cast<size_t>(m - 1));
    std::span<double> lo(logits.data(), static_cast<size_t>(m));
    std::span<double> pr(probs.data(), static_cast<size_t>(m));
    double* gs = g_steps + step_offset_[j];

    for (int i = 0; i < n; ++i) {
      const int u = data_(i, j);
      detail::gpcm_logits_probs(theta[i], a, st, lo, pr);
      lp += std::log(pr[u]);

      double et = 0.0, ek = 0.0;
      for (int k = 1; k < m; ++k) {
        et += pr[k] * lo[k];
        ek += pr[k] * k;
      }
      g_log_a[j] += lo[u] - et;
      double tail = 0.0;
      for (int k = m - 1; k >= 1; --k) {
        tail += pr[k];
        gs[k - 1] += -a * ((k <= u ? 1.0 : 0.0) - tail);
      }
      g_theta[i] += a * (u - ek);
    }
    if (!std::isfinite(lp)) return kNegInf;
  }

  // Priors.  Sampling log a against a normal density is the lognormal
  // prior on a with its Jacobian already absorbed; same for log sigma
  // against half-Cauchy, whose Jacobian contributes +log sigma.
  const double la_var = prior_.log_a_sd * prior_.log_a_sd;
  for (int j = 0; j < nj; ++j) {
    lp += log_normal_pdf(log_a[j], 0.0, prior_.log_a_sd);
    g_log_a[j] += -log_a[j] / la_var;
  }

  const double sig_var = sigma * sigma;
  double g_mu = 0.0, g_lsig = 0.0;
  for (int s = 0; s < n_steps_; ++s) {
    double z = steps[s] - mu_b;
    lp += log_normal_pdf(steps[s], mu_b, sigma);
    g_steps[s] += -z / sig_var;
    g_mu += z / sig_var;
    g_lsig += -1.0 + z * z / sig_var;
  }

  const double th_var = prior_.theta_sd * prior_.theta_sd;
  for (int i = 0; i < n; ++i) {
    lp += log_normal_pdf(theta[i], 0.0, prior_.theta_sd);
    g_theta[i] += -theta[i] / th_var;
  }

  const double mu_var = prior_.step_mu_hyper_sd * prior_.step_mu_hyper_sd;
  lp += log_normal_pdf(mu_b, 0.0, prior_.step_mu_hyper_sd);
  g_mu += -mu_b / mu_var;

  const double s2 = prior_.step_sigma_hyper_scale * prior_.step_sigma_hyper_scale;
  lp += std::log(2.0 * prior_.step_sigma_hyper_scale /
                 3.1415926535897932384626433832795) -
        std::log(s2 + sig_var) + log_sigma;
  g_lsig += 1.0 - 2.0 * sig_var / (s2 + sig_var);

  grad[mu_offset()] = g_mu;
  grad[log_sigma_offset()] = g_lsig;

  if (!std::isfinite(lp)) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return kNegInf;
  }
  return lp;
}

std::vector<std::string> GpcmPosterior::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(dim_);
  for (int j = 0; j < n_items_; ++j)
    names.push_back("a[" + std::to_string(j + 1) + "]");
  for (int j = 0; j < n_items_; ++j)
    for (int k = 2; k <= m_per_item_[j]; ++k)
      names.push_back("b[" + std::to_string(j + 1) + "," + std::to_string(k) +
                      "]");
  for (int i = 0; i < data_.n_persons; ++i)
    names.push_back("theta[" + std::to_string(i + 1) + "]");
  names.push_back("mu_b");
  names.push_back("sigma_b");
  return names;
}

void GpcmPosterior::constrain(std::span<const double> state,
                              std::span<double> out) const {
  if (state.size() != static_cast<size_t>(dim_) ||
      out.size() != static_cast<size_t>(dim_))
    throw invalid_input_error("state size does not match the posterior");
  std::copy(state.begin(), state.end(), out.begin());
  for (int j = 0; j < n_items_; ++j) out[j] = std::exp(state[j]);
  out[log_sigma_offset()] = std::exp(state[log_sigma_offset()]);
}

ItemBank GpcmPosterior::state_to_bank(std::span<const double> state) const {
  if (state.size() != static_cast<size_t>(dim_))
    throw invalid_input_error("state size does not match the posterior");
  ItemBank bank;
  bank.items.resize(n_items_);
  for (int j = 0; j < n_items_; ++j) {
    bank.items[j].discrimination = std::exp(state[log_a_offset() + j]);
    const double* st = state.data() + steps_offset() + step_offset_[j];
    bank.items[j].steps.assign(st, st + m_per_item_[j] - 1);
  }
  return bank;
}

namespace {

struct LeapfrogState {
  std::vector<double> x, p, g;
  double logp = kNegInf;
};

// L leapfrog steps with an identity mass matrix.  Returns false as soon
// as the trajectory leaves the support (non-finite log density).
bool leapfrog(const LogDensityGrad& target, LeapfrogState& s, double eps,
              int L) {
  const int dim = static_cast<int>(s.x.size());
  for (int i = 0; i < dim; ++i) s.p[i] += 0.5 * eps * s.g[i];
  for (int l = 0; l < L; ++l) {
    for (int i = 0; i < dim; ++i) s.x[i] += eps * s.p[i];
    s.logp = target(s.x, s.g);
    if (!std::isfinite(s.logp)) return false;
    const double w = (l + 1 < L) ? eps : 0.5 * eps;
    for (int i = 0; i < dim; ++i) s.p[i] += w * s.g[i];
  }
  return true;
}

double kinetic(const std::vector<double>& p) {
  double k = 0.0;
  for (double v : p) k += v * v;
  return 0.5 * k;
}

// Crude bracketing of a starting step size: double or halve until one
// leapfrog step crosses 50% acceptance.
double initial_step_size(const LogDensityGrad& target,
                         const std::vector<double>& x0,
                         const std::vector<double>& g0, double logp0,
                         Rng& rng) {
  const int dim = static_cast<int>(x0.size());
  std::vector<double> p0(dim);
  for (int i = 0; i < dim; ++i) p0[i] = rng.normal();
  const double h0 = logp0 - kinetic(p0);

  double eps = 1.0;
  auto log_ratio = [&](double e) {
    LeapfrogState s{x0, p0, g0, logp0};
    if (!leapfrog(target, s, e, 1)) return kNegInf;
    return s.logp - kinetic(s.p) - h0;
  };

  double r = log_ratio(eps);
  const double dir = (r > std::log(0.5)) ? 1.0 : -1.0;
  for (int i = 0; i < 100; ++i) {
    if (dir * r <= dir * std::log(0.5)) break;
    eps *= (dir > 0.0) ? 2.0 : 0.5;
    if (eps > 1e3 || eps < 1e-10) break;
    r = log_ratio(eps);
  }
  return eps;
}

}  // namespace

HmcChainResult run_hmc_chain(const LogDensityGrad& target, int dim,
                             std::span<const double> init, int iters,
                             int warmup, double target_accept,
                             int leapfrog_min, int leapfrog_max, Rng& rng) {
  if (dim < 1) throw invalid_input_error("dimension must be >= 1");
  if (init.size() != static_cast<size_t>(dim))
    throw invalid_input_error("init size does not match dimension");
  if (warmup < 1 || iters <= warmup)
    throw invalid_input_error("need iters > warmup >= 1");
  if (leapfrog_min < 1 || leapfrog_max < leapfrog_min)
    throw invalid_input_error("leapfrog range is invalid");

  std::vector<double> x(init.begin(), init.end());
  std::vector<double> g(dim);
  double logp = target(x, g);
  if (!std::isfinite(logp))
    throw invalid_input_error("HMC init has zero posterior density");

  double eps = initial_step_size(target, x, g, logp, rng);

  // Dual averaging (Hoffman-Gelman constants).
  const double mu_da = std::log(10.0 * eps);
  const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double log_eps_bar = 0.0, h_bar = 0.0;

  HmcChainResult res;
  res.dim = dim;
  res.n_retained = iters - warmup;
  res.draws.assign(static_cast<size_t>(res.n_retained) * dim, 0.0);

  LeapfrogState prop;
  prop.x.resize(dim);
  prop.p.resize(dim);
  prop.g.resize(dim);

  const int span = leapfrog_max - leapfrog_min + 1;
  double accept_sum = 0.0;

  for (int t = 1; t <= iters; ++t) {
    prop.x = x;
    prop.g = g;
    prop.logp = logp;
    for (int i = 0; i < dim; ++i) prop.p[i] = rng.normal();
    const double h0 = logp - kinetic(prop.p);

    const int L = leapfrog_min + static_cast<int>(rng.uniform_int(span));
    double alpha = 0.0;
    if (leapfrog(target, prop, eps, L)) {
      double dh = prop.logp - kinetic(prop.p) - h0;
      alpha = (dh >= 0.0) ? 1.0 : std::exp(dh);
    }
    if (rng.uniform() < alpha) {
      x = prop.x;
      g = prop.g;
      logp = prop.logp;
    }

    if (t <= warmup) {
      const double w = 1.0 / (t + t0);
      h_bar = (1.0 - w) * h_bar + w * (target_accept - alpha);
      double log_eps = mu_da - std::sqrt(static_cast<double>(t)) / gamma * h_bar;
      double eta = std::pow(static_cast<double>(t), -kappa);
      log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
      eps = std::exp(log_eps);
      if (t == warmup) eps = std::exp(log_eps_bar);
    } else {
      accept_sum += alpha;
      double* row = res.draws.data() +
                    static_cast<size_t>(t - warmup - 1) * dim;
      std::copy(x.begin(), x.end(), row);
    }
  }

  res.accept_rate = accept_sum / res.n_retained;
  res.step_size = eps;
  return res;
}

double psrf(const std::vector<std::vector<double>>& chains) {
  const int c = static_cast<int>(chains.size());
  if (c < 2) throw invalid_input_error("PSRF needs at least 2 chains");
  const size_t n = chains[0].size();
  if (n < 2) throw invalid_input_error("PSRF needs chains of length >= 2");
  for (const auto& ch : chains)
    if (ch.size() != n)
      throw invalid_input_error("PSRF needs equal-length chains");

  double grand = 0.0;
  std::vector<double> means(c);
  for (int i = 0; i < c; ++i) {
    double s = std::accumulate(chains[i].begin(), chains[i].end(), 0.0);
    means[i] = s / n;
    grand += means[i];
  }
  grand /= c;

  double w = 0.0;
  for (int i = 0; i < c; ++i) {
    double ss = 0.0;
    for (double v : chains[i]) ss += (v - means[i]) * (v - means[i]);
    w += ss / (n - 1);
  }
  w /= c;
  if (w <= 0.0)
    throw stuck_chain_error("zero within-chain variance; PSRF is undefined");

  double b_over_n = 0.0;
  for (int i = 0; i < c; ++i)
    b_over_n += (means[i] - grand) * (means[i] - grand);
  b_over_n /= (c - 1);

  double var_plus = (static_cast<double>(n) - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

McmcFit fit_mcmc(const ResponseMatrix& data, const std::vector<int>& m_per_item,
                 const PriorSpec& prior, const HmcConfig& cfg) {
  cfg.validate();
  if (data.n_persons < 1)
    throw invalid_input_error("need at least one person to fit");
  GpcmPosterior post(data, m_per_item, prior);
  const int dim = post.dim();
  LogDensityGrad target = [&post](std::span<const double> s,
                                  std::span<double> g) {
    return post.log_density_grad(s, g);
  };

  const int retained = cfg.iters_per_chain - cfg.warmup;
  std::vector<std::string> names = post.parameter_names();

  double worst_psrf = 0.0;
  std::string worst_name;

  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    uint64_t attempt_seed =
        (attempt == 0)
            ? cfg.seed
            : derive_seed(cfg.seed, "mcmc-retry",
                          {static_cast<uint64_t>(attempt)});

    std::vector<HmcChainResult> chains(cfg.n_chains);
    for (int c = 0; c < cfg.n_chains; ++c) {
      Rng rng(derive_seed(attempt_seed, "chain", {static_cast<uint64_t>(c)}));
      std::vector<double> init(dim);
      for (int i = 0; i < dim; ++i) init[i] = rng.uniform(-2.0, 2.0);
      chains[c] =
          run_hmc_chain(target, dim, init, cfg.iters_per_chain, cfg.warmup,
                        cfg.target_accept, cfg.leapfrog_min, cfg.leapfrog_max,
                        rng);
    }

    // Constrained-scale draws, chain-major.
    PosteriorDraws draws;
    draws.names = names;
    draws.n_chains = cfg.n_chains;
    draws.n_retained = retained;
    draws.values.assign(
        static_cast<size_t>(cfg.n_chains) * retained * dim, 0.0);
    std::vector<double> con(dim);
    for (int c = 0; c < cfg.n_chains; ++c)
      for (int t = 0; t < retained; ++t) {
        std::span<const double> row(
            chains[c].draws.data() + static_cast<size_t>(t) * dim,
            static_cast<size_t>(dim));
        post.constrain(row, con);
        std::copy(con.begin(), con.end(),
                  draws.values.begin() +
                      (static_cast<size_t>(c) * retained + t) * dim);
      }

    bool aborted = false;
    double attempt_worst = 0.0;
    std::string attempt_worst_name;
    std::vector<double> psrf_values(dim, 0.0);
    std::vector<std::vector<double>> per_chain(cfg.n_chains);
    for (int p = 0; p < dim && !aborted; ++p) {
      for (int c = 0; c < cfg.n_chains; ++c)
        per_chain[c] = draws.chain_draws(c, p);
      try {
        psrf_values[p] = psrf(per_chain);
      } catch (const stuck_chain_error&) {
        aborted = true;
        attempt_worst = std::numeric_limits<double>::infinity();
        attempt_worst_name = names[p];
        break;
      }
      if (psrf_values[p] > attempt_worst) {
        attempt_worst = psrf_values[p];
        attempt_worst_name = names[p];
      }
    }

    if (attempt_worst > worst_psrf || worst_name.empty()) {
      worst_psrf = attempt_worst;
      worst_name = attempt_worst_name;
    }

    if (!aborted && attempt_worst < cfg.psrf_cutoff) {
      McmcFit fit;
      fit.draws = std::move(draws);
      fit.psrf = std::move(psrf_values);
      fit.n_retries = attempt;
      for (const auto& ch : chains) {
        fit.accept_rate.push_back(ch.accept_rate);
        fit.step_size.push_back(ch.step_size);
      }

      const size_t total = static_cast<size_t>(cfg.n_chains) * retained;
      std::vector<double> mean(dim, 0.0);
      for (int c = 0; c < cfg.n_chains; ++c)
        for (int t = 0; t < retained; ++t)
          for (int p = 0; p < dim; ++p) mean[p] += fit.draws.at(c, t, p);
      for (int p = 0; p < dim; ++p) mean[p] /= static_cast<double>(total);

      fit.bank_hat.items.resize(post.n_items());
      for (int j = 0; j < post.n_items(); ++j)
        fit.bank_hat.items[j].discrimination = mean[post.log_a_offset() + j];
      int s = post.steps_offset();
      for (int j = 0; j < post.n_items(); ++j) {
        int mj = m_per_item[j];
        fit.bank_hat.items[j].steps.assign(mean.begin() + s,
                                           mean.begin() + s + mj - 1);
        s += mj - 1;
      }
      fit.theta_hat.assign(mean.begin() + post.theta_offset(),
                           mean.begin() + post.theta_offset() +
                               data.n_persons);
      fit.mu_b_hat = mean[post.mu_offset()];
      fit.sigma_b_hat = mean[post.log_sigma_offset()];
      return fit;
    }
  }

  throw nonconvergence_error(worst_psrf, worst_name, cfg.max_retries);
}

std::vector<SummaryRow> posterior_summaries(const PosteriorDraws& draws) {
  const int np = draws.n_params();
  const size_t total =
      static_cast<size_t>(draws.n_chains) * draws.n_retained;
  if (total < 2) throw invalid_input_error("summaries need >= 2 draws");

  std::vector<SummaryRow> rows(np);
  std::vector<double> pooled(total);
  for (int p = 0; p < np; ++p) {
    size_t idx = 0;
    for (int c = 0; c < draws.n_chains; ++c)
      for (int t = 0; t < draws.n_retained; ++t)
        pooled[idx++] = draws.at(c, t, p);

    double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / total;
    double ss = 0.0;
    for (double v : pooled) ss += (v - mean) * (v - mean);
    std::sort(pooled.begin(), pooled.end());
    auto quantile = [&](double q) {
      double h = q * (static_cast<double>(total) - 1.0);
      size_t lo = static_cast<size_t>(h);
      if (lo + 1 >= total) return pooled[total - 1];
      return pooled[lo] + (h - lo) * (pooled[lo + 1] - pooled[lo]);
    };
    rows[p].name = draws.names[p];
    rows[p].mean = mean;
    rows[p].sd = std::sqrt(ss / (static_cast<double>(total) - 1.0));
    rows[p].q5 = quantile(0.05);
    rows[p].q95 = quantile(0.95);
  }
  return rows;
}

}  // namespace gpcm
