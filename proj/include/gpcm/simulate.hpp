#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpcm/em.hpp"
#include "gpcm/fleishman.hpp"
#include "gpcm/mcmc.hpp"
#include "gpcm/types.hpp"

namespace gpcm {

enum class LatentDist { normal, uniform, skewed };

struct LatentDistribution {
  LatentDist tag = LatentDist::normal;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  FleishmanCoeffs coeffs;  // resolved when tag == skewed

  static LatentDistribution make_normal();
  static LatentDistribution make_uniform();
  // Defaults are the harness targets: skewness 1.25, excess kurtosis 1.5.
  static LatentDistribution make_skewed(double skewness = 1.25,
                                        double excess_kurtosis = 1.5);

  std::string name() const;
  static LatentDistribution from_name(const std::string& name);
};

struct SimCondition {
  LatentDistribution distribution;
  int sample_size = 500;
  int test_length = 5;   // prefix of the generating bank, <= 20
  int n_replications = 100;
  uint64_t base_seed = 0;

  void validate() const;
  std::string id() const;  // e.g. "normal_ss500_tl5"
};

/* Latent trait draws.  The theta seed is derived from base_seed and
 * (distribution, n) only -- not the test length or replication -- so every
 * replication of a condition, and every test length at the same
 * (distribution, sample size), sees the identical theta vector. */
ThetaVector generate_thetas(const LatentDistribution& dist, int n,
                            uint64_t base_seed);

// Categorical draws from the model probabilities, one row per theta.
ResponseMatrix generate_responses(const ItemBank& bank,
                                  const ThetaVector& thetas, uint64_t seed);

// Mean signed error and root mean squared error across replications.
double bias(std::span<const double> estimates, double truth);
double rmse(std::span<const double> estimates, double truth);

struct ReplicationRecord {
  int replication = 0;        // 1-based
  std::string estimator;      // "mmle" | "mcmc"
  std::string param_class;    // "discrimination" | "location" | "ability"
  std::string param_name;     // a[j], b[j,k], theta[i]
  double truth = 0.0;
  double estimate = 0.0;
};

// Per parameter class: per-parameter bias/RMSE across replications,
// then mean/SD over the parameters of the class.  MSE columns carry the
// squared-error companions of the RMSE columns.
struct ClassSummary {
  double bias_mean = 0.0, bias_sd = 0.0;
  double rmse_mean = 0.0, rmse_sd = 0.0;
  double mse_mean = 0.0, mse_sd = 0.0;
  int n_parameters = 0;
  int n_replications = 0;
};

struct RecoveryReport {
  SimCondition condition;
  std::vector<ReplicationRecord> records;  // tidy per-replication rows
  // summaries[estimator][param_class]
  std::map<std::string, std::map<std::string, ClassSummary>> summaries;
  // replications excluded from the metrics (estimator did not converge)
  std::map<std::string, std::vector<int>> nonconverged;
  // MCMC re-estimation attempts per replication
  std::vector<int> mcmc_retries;

  void recompute_summaries();
};

struct EstimatorSet {
  bool mmle = true;
  bool mcmc = true;
};

struct RunConditionOptions {
  EstimatorSet estimators;
  EmConfig em;
  PriorSpec prior;
  HmcConfig hmc;
  int threads = 1;
  // Called after each replication finishes; replication is 1-based.
  std::function<void(int replication)> progress;
};

/* One Monte Carlo cell: for every replication generate responses from the
 * condition's shared thetas, fit the requested estimators, score
 * abilities (EAP for MMLE, posterior means for MCMC), and accumulate
 * per-parameter recovery records.  Nonconvergent replications are
 * excluded from the summaries and listed in the report. */
RecoveryReport run_condition(const SimCondition& cond,
                             const RunConditionOptions& opts = {});

// A fitted parameter set reduced to what estimate comparison needs.
struct FitResult {
  ItemBank bank;
  ThetaVector theta;
};

struct ItemParamDiff {
  std::string name;
  double value_a = 0.0;
  double value_b = 0.0;
};

struct CompareReport {
  std::vector<ItemParamDiff> item_params;
  double ability_mean_diff = 0.0;
  double ability_sd_diff = 0.0;
  double ability_max_abs_diff = 0.0;
  double ability_correlation = 1.0;
};

// Estimate-comparison statistics for two fits of the same data.
CompareReport compare_estimates(const FitResult& fit_a, const FitResult& fit_b);

}  // namespace gpcm
