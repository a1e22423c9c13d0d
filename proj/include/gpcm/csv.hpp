#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpcm/mcmc.hpp"
#include "gpcm/simulate.hpp"
#include "gpcm/types.hpp"

namespace gpcm {

// Shortest round-trip decimal formatting ('.' separator, no locale).
std::string format_double(double x);

struct ParsedResponses {
  ResponseMatrix data;
  std::vector<std::string> item_names;
  std::vector<int> m_inferred;  // max category + 1 per item
  std::vector<std::vector<long>> category_counts;  // per item, per category
};

/* Response CSV: header row of item names, body rows of integer 0-based
 * categories.  Non-integer cells, negative values, ragged or missing
 * entries raise parse_error with 1-based (row, col) coordinates; when
 * m_per_item is given, categories are range-checked against it. */
ParsedResponses parse_response_csv(const std::filesystem::path& path,
                                   const std::vector<int>* m_per_item = nullptr);

void write_response_csv(const std::filesystem::path& path,
                        const ResponseMatrix& data,
                        const std::vector<std::string>& item_names);

/* Item-parameter CSV: columns item,a,b2,b3,...,b<m_max>; the step columns
 * are the transition locations d_2..d_m, blank when an item has fewer
 * categories than the widest one. */
void write_item_csv(const std::filesystem::path& path, const ItemBank& bank);
ItemBank parse_item_csv(const std::filesystem::path& path);

// Ability CSV: person,estimate,sd (sd column blank when not available).
void write_ability_csv(const std::filesystem::path& path,
                       const ThetaVector& theta,
                       const std::vector<double>* sd = nullptr);
// Reads the estimate column back; fills *sd_out when given (blank -> NaN).
ThetaVector parse_ability_csv(const std::filesystem::path& path,
                              std::vector<double>* sd_out = nullptr);

void write_theta_csv(const std::filesystem::path& path,
                     const ThetaVector& theta);
ThetaVector parse_theta_csv(const std::filesystem::path& path);

// Tidy per-replication records:
// condition_id,distribution,SS,TL,replication,estimator,param_class,
// param_name,truth,estimate
void write_tidy_csv(const std::filesystem::path& path,
                    const RecoveryReport& report);
std::vector<RecoveryReport> parse_tidy_csv(const std::filesystem::path& path);

// Summary table in the recovery-table layout (bias mean/SD, RMSE mean/SD,
// plus the MSE reading), one row per (condition, estimator, class).
void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<RecoveryReport>& reports);

// Draw dump: chain,iteration,parameter,value (iteration is the retained
// index, 1-based).
void write_draws_csv(const std::filesystem::path& path,
                     const PosteriorDraws& draws);

// Posterior summary table: parameter,mean,sd,q5,q95,psrf.  psrf may be
// empty when the diagnostic was not computed.
void write_mcmc_summary_csv(const std::filesystem::path& path,
                            const std::vector<SummaryRow>& rows,
                            const std::vector<double>& psrf);

void write_compare_csv(const std::filesystem::path& path,
                       const CompareReport& report);

}  // namespace gpcm
