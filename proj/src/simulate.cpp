#include "gpcm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "gpcm/errors.hpp"
#include "gpcm/model.hpp"
#include "gpcm/rng.hpp"
#include "gpcm/generating_bank.hpp"

namespace gpcm {

LatentDistribution LatentDistribution::make_normal() {
  return LatentDistribution{};
}

LatentDistribution LatentDistribution::make_uniform() {
  LatentDistribution d;
  d.tag = LatentDist::uniform;
  return d;
}

LatentDistribution LatentDistribution::make_skewed(double skewness,
                                                   double excess_kurtosis) {
  LatentDistribution d;
  d.tag = LatentDist::skewed;
  d.skewness = skewness;
  d.excess_kurtosis = excess_kurtosis;
  d.coeffs = fleishman_coeffs(skewness, excess_kurtosis);
  return d;
}

std::string LatentDistribution::name() const {
  switch (tag) {
    case LatentDist::normal: return "normal";
    case LatentDist::uniform: return "uniform";
    case LatentDist::skewed: return "skewed";
  }
  throw invalid_input_error("unknown latent distribution tag");
}

LatentDistribution LatentDistribution::from_name(const std::string& name) {
  if (name == "normal") return make_normal();
  if (name == "uniform") return make_uniform();
  if (name == "skewed") return make_skewed();
  throw invalid_input_error("unknown latent distribution '" + name +
                            "' (expected normal, uniform, or skewed)");
}

void SimCondition::validate() const {
  if (sample_size < 1) throw invalid_input_error("sample_size must be >= 1");
  if (test_length < 1 || test_length > generating_bank().n_items())
    throw invalid_input_error("test_length must be between 1 and " +
                              std::to_string(generating_bank().n_items()));
  if (n_replications < 1)
    throw invalid_input_error("n_replications must be >= 1");
}

std::string SimCondition::id() const {
  return distribution.name() + "_ss" + std::to_string(sample_size) + "_tl" +
         std::to_string(test_length);
}

ThetaVector generate_thetas(const LatentDistribution& dist, int n,
                            uint64_t base_seed) {
  if (n < 1) throw invalid_input_error("need n >= 1 thetas");
  Rng rng(derive_seed(base_seed, "thetas",
                      {static_cast<uint64_t>(dist.tag),
                       static_cast<uint64_t>(n)}));
  ThetaVector out(n);
  switch (dist.tag) {
    case LatentDist::normal:
      for (int i = 0; i < n; ++i) out[i] = rng.normal();
      break;
    case LatentDist::uniform:
      for (int i = 0; i < n; ++i) out[i] = rng.uniform(-3.0, 3.0);
      break;
    case LatentDist::skewed:
      for (int i = 0; i < n; ++i) out[i] = dist.coeffs.transform(rng.normal());
      break;
  }
  return out;
}

ResponseMatrix generate_responses(const ItemBank& bank,
                                  const ThetaVector& thetas, uint64_t seed) {
  bank.validate();
  validate_thetas(thetas);
  const int n = static_cast<int>(thetas.size());
  const int nj = bank.n_items();
  if (n < 1) throw invalid_input_error("need at least one theta");

  int max_m = 0;
  for (const auto& it : bank.items) max_m = std::max(max_m, it.n_categories());
  std::vector<double> logits(max_m), probs(max_m);

  Rng rng(seed);
  ResponseMatrix data(n, nj);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < nj; ++j) {
      const auto& it = bank.items[j];
      const int m = it.n_categories();
      detail::gpcm_logits_probs(thetas[i], it.discrimination, it.steps,
                                {logits.data(), static_cast<size_t>(m)},
                                {probs.data(), static_cast<size_t>(m)});
      data(i, j) = rng.categorical({probs.data(), static_cast<size_t>(m)});
    }
  return data;
}

double bias(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw invalid_input_error("bias needs >= 1 estimate");
  double s = 0.0;
  for (double e : estimates) s += e - truth;
  return s / static_cast<double>(estimates.size());
}

double rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw invalid_input_error("rmse needs >= 1 estimate");
  double s = 0.0;
  for (double e : estimates) s += (e - truth) * (e - truth);
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

namespace {

std::string item_a_name(int j) { return "a[" + std::to_string(j + 1) + "]"; }
std::string item_b_name(int j, int k) {
  return "b[" + std::to_string(j + 1) + "," + std::to_string(k) + "]";
}
std::string theta_name(int i) {
  return "theta[" + std::to_string(i + 1) + "]";
}

// Everything one replication produces, assembled into the report in
// replication order afterwards so threading cannot reorder output.
struct RepOutcome {
  std::vector<ReplicationRecord> records;
  bool mmle_failed = false;
  bool mcmc_failed = false;
  int mcmc_retries = -1;  // -1 when MCMC was not run
};

void append_bank_records(std::vector<ReplicationRecord>& out, int rep,
                         const std::string& estimator, const ItemBank& truth,
                         const ItemBank& est) {
  for (int j = 0; j < truth.n_items(); ++j) {
    out.push_back({rep, estimator, "discrimination", item_a_name(j),
                   truth.items[j].discrimination,
                   est.items[j].discrimination});
    const auto& ts = truth.items[j].steps;
    for (size_t s = 0; s < ts.size(); ++s)
      out.push_back({rep, estimator, "location",
                     item_b_name(j, static_cast<int>(s) + 2), ts[s],
                     est.items[j].steps[s]});
  }
}

void append_theta_records(std::vector<ReplicationRecord>& out, int rep,
                          const std::string& estimator,
                          const ThetaVector& truth, const ThetaVector& est) {
  for (size_t i = 0; i < truth.size(); ++i)
    out.push_back({rep, estimator, "ability", theta_name(static_cast<int>(i)),
                   truth[i], est[i]});
}

bool maps_are_identity(const std::vector<std::vector<int>>& maps) {
  for (const auto& m : maps)
    for (size_t k = 0; k < m.size(); ++k)
      if (m[k] != static_cast<int>(k)) return false;
  return true;
}

RepOutcome run_one_replication(const SimCondition& cond,
                               const RunConditionOptions& opts,
                               const ItemBank& bank,
                               const std::vector<int>& m_per_item,
                               const ThetaVector& thetas, int rep) {
  const uint64_t dist_field = static_cast<uint64_t>(cond.distribution.tag);
  const uint64_t ss = static_cast<uint64_t>(cond.sample_size);
  const uint64_t tl = static_cast<uint64_t>(cond.test_length);
  const uint64_t r = static_cast<uint64_t>(rep);

  ResponseMatrix data = generate_responses(
      bank, thetas,
      derive_seed(cond.base_seed, "responses", {dist_field, ss, tl, r}));

  RepOutcome out;
  if (opts.estimators.mmle) {
    try {
      MmleFit fit = fit_mmle(data, m_per_item, opts.em);
      // A collapsed category leaves the fitted item with fewer steps than
      // the truth, so the replication cannot enter the comparison.
      if (!fit.converged || !maps_are_identity(fit.category_maps)) {
        out.mmle_failed = true;
      } else {
        append_bank_records(out.records, rep, "mmle", bank, fit.bank_hat);
        EapResult eap = eap_abilities(data, fit.bank_hat, opts.em.grid);
        append_theta_records(out.records, rep, "mmle", thetas, eap.theta);
      }
    } catch (const std::runtime_error&) {
      out.mmle_failed = true;
    }
  }

  if (opts.estimators.mcmc) {
    HmcConfig hc = opts.hmc;
    hc.seed = derive_seed(cond.base_seed, "mcmc", {dist_field, ss, tl, r});
    try {
      McmcFit fit = fit_mcmc(data, m_per_item, opts.prior, hc);
      out.mcmc_retries = fit.n_retries;
      append_bank_records(out.records, rep, "mcmc", bank, fit.bank_hat);
      append_theta_records(out.records, rep, "mcmc", thetas, fit.theta_hat);
    } catch (const nonconvergence_error&) {
      out.mcmc_failed = true;
      out.mcmc_retries = hc.max_retries;
    } catch (const std::runtime_error&) {
      out.mcmc_failed = true;
      out.mcmc_retries = hc.max_retries;
    }
  }
  return out;
}

}  // namespace

RecoveryReport run_condition(const SimCondition& cond,
                             const RunConditionOptions& opts) {
  cond.validate();
  opts.em.validate();
  opts.prior.validate();
  opts.hmc.validate();
  if (opts.threads < 1) throw invalid_input_error("threads must be >= 1");

  const ItemBank bank = generating_bank_prefix(cond.test_length);
  const std::vector<int> m_per_item = categories_per_item(bank);
  const ThetaVector thetas =
      generate_thetas(cond.distribution, cond.sample_size, cond.base_seed);

  std::vector<RepOutcome> outcomes(cond.n_replications);
  std::atomic<int> next{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (;;) {
      int idx = next.fetch_add(1);
      if (idx >= cond.n_replications) return;
      outcomes[idx] =
          run_one_replication(cond, opts, bank, m_per_item, thetas, idx + 1);
      if (opts.progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        opts.progress(idx + 1);
      }
    }
  };

  int n_threads = std::min(opts.threads, cond.n_replications);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RecoveryReport report;
  report.condition = cond;
  for (int rep = 1; rep <= cond.n_replications; ++rep) {
    RepOutcome& o = outcomes[rep - 1];
    report.records.insert(report.records.end(), o.records.begin(),
                          o.records.end());
    if (opts.estimators.mmle && o.mmle_failed)
      report.nonconverged["mmle"].push_back(rep);
    if (opts.estimators.mcmc) {
      if (o.mcmc_failed) report.nonconverged["mcmc"].push_back(rep);
      report.mcmc_retries.push_back(o.mcmc_retries);
    }
  }
  report.recompute_summaries();
  return report;
}

void RecoveryReport::recompute_summaries() {
  summaries.clear();

  struct ParamSeries {
    std::string param_class;
    double truth = 0.0;
    std::vector<double> estimates;
  };
  std::map<std::string, std::map<std::string, ParamSeries>> grouped;
  std::map<std::string, std::map<std::string, std::set<int>>> reps_seen;

  std::map<std::string, std::set<int>> excluded;
  for (const auto& [est, reps] : nonconverged)
    excluded[est] = std::set<int>(reps.begin(), reps.end());

  for (const auto& rec : records) {
    auto ex = excluded.find(rec.estimator);
    if (ex != excluded.end() && ex->second.count(rec.replication)) continue;
    ParamSeries& ps = grouped[rec.estimator][rec.param_name];
    ps.param_class = rec.param_class;
    ps.truth = rec.truth;
    ps.estimates.push_back(rec.estimate);
    reps_seen[rec.estimator][rec.param_class].insert(rec.replication);
  }

  for (const auto& [est, params] : grouped) {
    std::map<std::string, std::vector<double>> bias_by_class, rmse_by_class,
        mse_by_class;
    for (const auto& [name, ps] : params) {
      double b = bias(ps.estimates, ps.truth);
      double r = rmse(ps.estimates, ps.truth);
      bias_by_class[ps.param_class].push_back(b);
      rmse_by_class[ps.param_class].push_back(r);
      mse_by_class[ps.param_class].push_back(r * r);
    }
    for (const auto& [cls, biases] : bias_by_class) {
      auto mean_sd = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        double sd = v.size() > 1
                        ? std::sqrt(ss / (static_cast<double>(v.size()) - 1.0))
                        : 0.0;
        return std::pair<double, double>(mean, sd);
      };
      ClassSummary cs;
      auto [bm, bs] = mean_sd(biases);
      auto [rm, rs] = mean_sd(rmse_by_class[cls]);
      auto [mm, ms] = mean_sd(mse_by_class[cls]);
      cs.bias_mean = bm;
      cs.bias_sd = bs;
      cs.rmse_mean = rm;
      cs.rmse_sd = rs;
      cs.mse_mean = mm;
      cs.mse_sd = ms;
      cs.n_parameters = static_cast<int>(biases.size());
      cs.n_replications =
          static_cast<int>(reps_seen[est][cls].size());
      summaries[est][cls] = cs;
    }
  }
}

CompareReport compare_estimates(const FitResult& fit_a,
                                const FitResult& fit_b) {
  fit_a.bank.validate();
  fit_b.bank.validate();
  if (fit_a.bank.n_items() != fit_b.bank.n_items())
    throw invalid_input_error("fits disagree on the number of items");
  if (fit_a.theta.size() != fit_b.theta.size())
    throw invalid_input_error("fits disagree on the number of persons");
  const int n = static_cast<int>(fit_a.theta.size());
  if (n < 2)
    throw invalid_input_error("estimate comparison needs >= 2 persons");

  CompareReport rep;
  for (int j = 0; j < fit_a.bank.n_items(); ++j) {
    const auto& ia = fit_a.bank.items[j];
    const auto& ib = fit_b.bank.items[j];
    if (ia.n_categories() != ib.n_categories())
      throw invalid_input_error("fits disagree on categories for item " +
                                std::to_string(j + 1));
    rep.item_params.push_back(
        {item_a_name(j), ia.discrimination, ib.discrimination});
    for (size_t s = 0; s < ia.steps.size(); ++s)
      rep.item_params.push_back({item_b_name(j, static_cast<int>(s) + 2),
                                 ia.steps[s], ib.steps[s]});
  }

  double mean_a = 0.0, mean_b = 0.0, mean_d = 0.0;
  for (int i = 0; i < n; ++i) {
    mean_a += fit_a.theta[i];
    mean_b += fit_b.theta[i];
    double d = fit_b.theta[i] - fit_a.theta[i];
    mean_d += d;
    rep.ability_max_abs_diff = std::max(rep.ability_max_abs_diff, std::abs(d));
  }
  mean_a /= n;
  mean_b /= n;
  mean_d /= n;
  rep.ability_mean_diff = mean_d;

  double ss_d = 0.0, ss_a = 0.0, ss_b = 0.0, cross = 0.0;
  for (int i = 0; i < n; ++i) {
    double da = fit_a.theta[i] - mean_a;
    double db = fit_b.theta[i] - mean_b;
    double d = (fit_b.theta[i] - fit_a.theta[i]) - mean_d;
    ss_d += d * d;
    ss_a += da * da;
    ss_b += db * db;
    cross += da * db;
  }
  rep.ability_sd_diff = std::sqrt(ss_d / (n - 1));
  if (ss_a <= 0.0 || ss_b <= 0.0)
    throw invalid_input_error(
        "ability estimates have zero variance; correlation is undefined");
  rep.ability_correlation = cross / std::sqrt(ss_a * ss_b);
  return rep;
}

}  // namespace gpcm
