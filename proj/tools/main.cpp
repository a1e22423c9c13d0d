// gpcmfit: simulate, fit, and recover partial-credit item response data.
//
// Exit codes: 0 success, 2 usage/config error, 3 data file error,
// 4 estimation nonconvergence.  Failures print one JSON line on stderr.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gpcm/csv.hpp"
#include "gpcm/em.hpp"
#include "gpcm/errors.hpp"
#include "gpcm/mcmc.hpp"
#include "gpcm/model.hpp"
#include "gpcm/rng.hpp"
#include "gpcm/simulate.hpp"
#include "gpcm/generating_bank.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNonconvergence = 4;
constexpr int kConfigSchemaVersion = 1;

struct cli_error : std::runtime_error {
  cli_error(std::string type, const std::string& msg, int code)
      : std::runtime_error(msg), type(std::move(type)), code(code) {}
  std::string type;
  int code;
};

void emit_error(const std::string& type, const std::string& message,
                int code) {
  json err = {{"error",
               {{"type", type}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << "\n";
}

// Everything a run needs, merged from defaults, --config, and flags.
struct RunSettings {
  gpcm::SimCondition condition;
  double skewness = 1.25;
  double excess_kurtosis = 1.5;
  gpcm::EmConfig em;
  gpcm::HmcConfig hmc;
  gpcm::PriorSpec prior;
  int quad_nodes = 61;
  double quad_range = 5.0;
  int threads = std::max(1u, std::thread::hardware_concurrency());
  uint64_t seed = 0;
};

void require_keys(const json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw cli_error("config_error",
                      "unknown key '" + key + "' in " + where, kExitUsage);
  }
}

template <typename T>
void load_if(const json& obj, const char* key, T& into) {
  if (obj.contains(key)) {
    try {
      into = obj.at(key).get<T>();
    } catch (const json::exception&) {
      throw cli_error("config_error",
                      std::string("bad value for config key '") + key + "'",
                      kExitUsage);
    }
  }
}

void apply_config_file(const fs::path& path, RunSettings& s,
                       std::string* dist_name) {
  std::ifstream in(path);
  if (!in)
    throw cli_error("file_not_found",
                    "config file '" + path.string() + "' cannot be read",
                    kExitData);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw cli_error("config_error",
                    "config is not valid JSON: " + std::string(e.what()),
                    kExitUsage);
  }
  if (!cfg.is_object())
    throw cli_error("config_error", "config root must be an object",
                    kExitUsage);
  require_keys(cfg, {"schema_version", "condition", "seed", "threads", "em",
                     "hmc", "prior"},
               "config");
  if (!cfg.contains("schema_version") ||
      !cfg["schema_version"].is_number_integer() ||
      cfg["schema_version"].get<int>() != kConfigSchemaVersion)
    throw cli_error("config_error",
                    "config schema_version must be " +
                        std::to_string(kConfigSchemaVersion),
                    kExitUsage);

  load_if(cfg, "seed", s.seed);
  load_if(cfg, "threads", s.threads);

  if (cfg.contains("condition")) {
    const json& c = cfg["condition"];
    // "fleishman" appears in emitted configs (resolved coefficients); it is
    // derived from the moments, so replays accept and ignore it.
    require_keys(c,
                 {"distribution", "sample_size", "test_length", "replications",
                  "skewness", "excess_kurtosis", "fleishman"},
                 "config.condition");
    load_if(c, "distribution", *dist_name);
    load_if(c, "sample_size", s.condition.sample_size);
    load_if(c, "test_length", s.condition.test_length);
    load_if(c, "replications", s.condition.n_replications);
    load_if(c, "skewness", s.skewness);
    load_if(c, "excess_kurtosis", s.excess_kurtosis);
  }
  if (cfg.contains("em")) {
    const json& c = cfg["em"];
    require_keys(c,
                 {"max_cycles", "outer_tol", "newton_max_iter", "newton_tol",
                  "nodes", "node_range"},
                 "config.em");
    load_if(c, "max_cycles", s.em.max_cycles);
    load_if(c, "outer_tol", s.em.outer_tol);
    load_if(c, "newton_max_iter", s.em.newton_max_iter);
    load_if(c, "newton_tol", s.em.newton_tol);
    load_if(c, "nodes", s.quad_nodes);
    load_if(c, "node_range", s.quad_range);
  }
  if (cfg.contains("hmc")) {
    const json& c = cfg["hmc"];
    require_keys(c,
                 {"chains", "iters", "warmup", "target_accept", "leapfrog_min",
                  "leapfrog_max", "psrf_cutoff", "max_retries"},
                 "config.hmc");
    load_if(c, "chains", s.hmc.n_chains);
    load_if(c, "iters", s.hmc.iters_per_chain);
    load_if(c, "warmup", s.hmc.warmup);
    load_if(c, "target_accept", s.hmc.target_accept);
    load_if(c, "leapfrog_min", s.hmc.leapfrog_min);
    load_if(c, "leapfrog_max", s.hmc.leapfrog_max);
    load_if(c, "psrf_cutoff", s.hmc.psrf_cutoff);
    load_if(c, "max_retries", s.hmc.max_retries);
  }
  if (cfg.contains("prior")) {
    const json& c = cfg["prior"];
    require_keys(c,
                 {"theta_sd", "log_a_sd", "step_mu_sd", "step_sigma_scale"},
                 "config.prior");
    load_if(c, "theta_sd", s.prior.theta_sd);
    load_if(c, "log_a_sd", s.prior.log_a_sd);
    load_if(c, "step_mu_sd", s.prior.step_mu_hyper_sd);
    load_if(c, "step_sigma_scale", s.prior.step_sigma_hyper_scale);
  }
}

// "normal,500,5" -> distribution name, sample size, test length.
void apply_condition_flag(const std::string& text, RunSettings& s,
                          std::string* dist_name) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3)
    throw cli_error("usage_error",
                    "--condition expects distribution,sample_size,test_length",
                    kExitUsage);
  *dist_name = parts[0];
  try {
    s.condition.sample_size = std::stoi(parts[1]);
    s.condition.test_length = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw cli_error("usage_error",
                    "--condition sample size and test length must be integers",
                    kExitUsage);
  }
}

void finalize_settings(RunSettings& s, const std::string& dist_name) {
  try {
    if (dist_name == "skewed")
      s.condition.distribution =
          gpcm::LatentDistribution::make_skewed(s.skewness, s.excess_kurtosis);
    else
      s.condition.distribution = gpcm::LatentDistribution::from_name(dist_name);
    s.em.grid = gpcm::normal_grid(s.quad_nodes, -s.quad_range, s.quad_range);
    s.em.validate();
    s.hmc.validate();
    s.prior.validate();
    if (s.threads < 1)
      throw gpcm::invalid_input_error("threads must be >= 1");
  } catch (const gpcm::infeasible_target_error& e) {
    throw cli_error("infeasible_target", e.what(), kExitUsage);
  } catch (const gpcm::invalid_input_error& e) {
    throw cli_error("config_error", e.what(), kExitUsage);
  }
}

json settings_to_json(const RunSettings& s) {
  json c = {{"distribution", s.condition.distribution.name()},
            {"sample_size", s.condition.sample_size},
            {"test_length", s.condition.test_length},
            {"replications", s.condition.n_replications}};
  if (s.condition.distribution.tag == gpcm::LatentDist::skewed) {
    c["skewness"] = s.skewness;
    c["excess_kurtosis"] = s.excess_kurtosis;
    c["fleishman"] = {{"a", s.condition.distribution.coeffs.a},
                      {"b", s.condition.distribution.coeffs.b},
                      {"c", s.condition.distribution.coeffs.c},
                      {"d", s.condition.distribution.coeffs.d}};
  }
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"condition", c},
      {"seed", s.seed},
      {"threads", s.threads},
      {"em",
       {{"max_cycles", s.em.max_cycles},
        {"outer_tol", s.em.outer_tol},
        {"newton_max_iter", s.em.newton_max_iter},
        {"newton_tol", s.em.newton_tol},
        {"nodes", s.quad_nodes},
        {"node_range", s.quad_range}}},
      {"hmc",
       {{"chains", s.hmc.n_chains},
        {"iters", s.hmc.iters_per_chain},
        {"warmup", s.hmc.warmup},
        {"target_accept", s.hmc.target_accept},
        {"leapfrog_min", s.hmc.leapfrog_min},
        {"leapfrog_max", s.hmc.leapfrog_max},
        {"psrf_cutoff", s.hmc.psrf_cutoff},
        {"max_retries", s.hmc.max_retries}}},
      {"prior",
       {{"theta_sd", s.prior.theta_sd},
        {"log_a_sd", s.prior.log_a_sd},
        {"step_mu_sd", s.prior.step_mu_hyper_sd},
        {"step_sigma_scale", s.prior.step_sigma_hyper_scale}}}};
}

std::string config_hash(const json& config) {
  std::string dump = config.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) h = (h ^ ch) * 0x100000001b3ULL;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw cli_error("file_error",
                    "cannot create output directory '" + out + "'", kExitData);
  return dir;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& argv, const json& config,
                    const json& extra, std::vector<std::string> outputs) {
  std::sort(outputs.begin(), outputs.end());
  json manifest = {{"tool", "gpcmfit"},
                   {"version", GPCMFIT_VERSION},
                   {"schema_version", kConfigSchemaVersion},
                   {"command", command},
                   {"argv", argv},
                   {"config", config},
                   {"config_hash", config_hash(config)},
                   {"outputs", outputs}};
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  std::ofstream out(out_dir / "manifest.json");
  if (!out)
    throw cli_error("file_error", "cannot write manifest.json", kExitData);
  out << manifest.dump(2) << "\n";
}

void require_file(const std::string& path) {
  if (!fs::exists(fs::path(path)))
    throw cli_error("file_not_found", "no such file: '" + path + "'",
                    kExitData);
}

std::vector<std::string> default_item_names(int n_items) {
  std::vector<std::string> names;
  names.reserve(n_items);
  for (int j = 1; j <= n_items; ++j)
    names.push_back("item" + std::to_string(j));
  return names;
}

// ------------------------------------------------------------ simulate ----

int cmd_simulate(const RunSettings& s, int replication, const fs::path& out,
                 const std::vector<std::string>& argv) {
  gpcm::SimCondition cond = s.condition;
  cond.base_seed = s.seed;
  cond.validate();

  gpcm::ItemBank bank = gpcm::generating_bank_prefix(cond.test_length);
  gpcm::ThetaVector thetas = gpcm::generate_thetas(
      cond.distribution, cond.sample_size, cond.base_seed);
  uint64_t resp_seed = gpcm::derive_seed(
      cond.base_seed, "responses",
      {static_cast<uint64_t>(cond.distribution.tag),
       static_cast<uint64_t>(cond.sample_size),
       static_cast<uint64_t>(cond.test_length),
       static_cast<uint64_t>(replication)});
  gpcm::ResponseMatrix data = gpcm::generate_responses(bank, thetas, resp_seed);

  gpcm::write_response_csv(out / "responses.csv", data,
                           default_item_names(bank.n_items()));
  gpcm::write_theta_csv(out / "thetas.csv", thetas);
  gpcm::write_item_csv(out / "items.csv", bank);

  json extra = {{"seeds",
                 {{"base", cond.base_seed},
                  {"responses", resp_seed},
                  {"replication", replication}}}};
  write_manifest(out, "simulate", argv, settings_to_json(s), extra,
                 {"responses.csv", "thetas.csv", "items.csv"});
  std::cout << "simulated " << cond.sample_size << " persons x "
            << cond.test_length << " items (" << cond.distribution.name()
            << ") -> " << out.string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- fit ----

int cmd_fit(const RunSettings& s, const std::string& data_path,
            const std::string& method, bool dump_draws, const fs::path& out,
            const std::vector<std::string>& argv) {
  require_file(data_path);
  gpcm::ParsedResponses parsed = gpcm::parse_response_csv(data_path);
  for (int j = 0; j < parsed.data.n_items; ++j)
    if (parsed.m_inferred[j] < 2)
      throw cli_error("degenerate_item",
                      "item '" + parsed.item_names[j] +
                          "' has all responses in one category",
                      kExitData);

  const bool run_mmle = (method == "mmle" || method == "both");
  const bool run_mcmc = (method == "mcmc" || method == "both");
  std::vector<std::string> outputs;
  json extra;
  extra["data"] = data_path;
  extra["n_persons"] = parsed.data.n_persons;
  extra["n_items"] = parsed.data.n_items;
  extra["categories"] = parsed.m_inferred;

  std::optional<gpcm::FitResult> mmle_result, mcmc_result;

  if (run_mmle) {
    gpcm::MmleFit fit = gpcm::fit_mmle(parsed.data, parsed.m_inferred, s.em);
    gpcm::ResponseMatrix mapped = fit.map_responses(parsed.data);
    gpcm::EapResult eap =
        gpcm::eap_abilities(mapped, fit.bank_hat, s.em.grid);
    gpcm::write_item_csv(out / "items_mmle.csv", fit.bank_hat);
    gpcm::write_ability_csv(out / "abilities_mmle.csv", eap.theta, &eap.sd);
    outputs.push_back("items_mmle.csv");
    outputs.push_back("abilities_mmle.csv");
    extra["mmle"] = {{"converged", fit.converged},
                     {"cycles", fit.n_cycles},
                     {"loglik", fit.loglik_trace.empty()
                                    ? 0.0
                                    : fit.loglik_trace.back()},
                     {"warnings", fit.warnings}};
    mmle_result = gpcm::FitResult{fit.bank_hat, eap.theta};
    std::cout << "mmle: " << fit.n_cycles << " cycles, "
              << (fit.converged ? "converged" : "NOT converged")
              << ", loglik "
              << (fit.loglik_trace.empty() ? 0.0 : fit.loglik_trace.back())
              << "\n";
  }

  if (run_mcmc) {
    gpcm::HmcConfig hc = s.hmc;
    hc.seed = gpcm::derive_seed(s.seed, "mcmc", {});
    gpcm::McmcFit fit =
        gpcm::fit_mcmc(parsed.data, parsed.m_inferred, s.prior, hc);

    std::vector<double> theta_sd;
    std::vector<gpcm::SummaryRow> rows = gpcm::posterior_summaries(fit.draws);
    int theta_offset = 0;
    for (int j = 0; j < parsed.data.n_items; ++j)
      theta_offset += parsed.m_inferred[j];  // a[j] plus its m-1 steps
    for (int i = 0; i < parsed.data.n_persons; ++i)
      theta_sd.push_back(rows[theta_offset + i].sd);

    gpcm::write_item_csv(out / "items_mcmc.csv", fit.bank_hat);
    gpcm::write_ability_csv(out / "abilities_mcmc.csv", fit.theta_hat,
                            &theta_sd);
    gpcm::write_mcmc_summary_csv(out / "summary_mcmc.csv", rows, fit.psrf);
    outputs.push_back("items_mcmc.csv");
    outputs.push_back("abilities_mcmc.csv");
    outputs.push_back("summary_mcmc.csv");
    if (dump_draws) {
      gpcm::write_draws_csv(out / "draws_mcmc.csv", fit.draws);
      outputs.push_back("draws_mcmc.csv");
    }
    double worst = *std::max_element(fit.psrf.begin(), fit.psrf.end());
    extra["mcmc"] = {{"retries", fit.n_retries},
                     {"worst_psrf", worst},
                     {"accept_rate", fit.accept_rate},
                     {"step_size", fit.step_size},
                     {"seed", hc.seed},
                     {"mu_b", fit.mu_b_hat},
                     {"sigma_b", fit.sigma_b_hat}};
    mcmc_result = gpcm::FitResult{fit.bank_hat, fit.theta_hat};
    std::cout << "mcmc: " << fit.n_retries << " retries, worst PSRF " << worst
              << "\n";
  }

  if (mmle_result && mcmc_result) {
    gpcm::CompareReport cmp =
        gpcm::compare_estimates(*mmle_result, *mcmc_result);
    gpcm::write_compare_csv(out / "compare.csv", cmp);
    outputs.push_back("compare.csv");
    extra["compare"] = {{"ability_correlation", cmp.ability_correlation},
                        {"ability_mean_diff", cmp.ability_mean_diff}};
    std::cout << "compare: ability correlation " << cmp.ability_correlation
              << ", mean diff " << cmp.ability_mean_diff << "\n";
  }

  write_manifest(out, "fit", argv, settings_to_json(s), extra, outputs);
  return 0;
}

// ------------------------------------------------------------- recover ----

int cmd_recover(const RunSettings& s, const std::string& method,
                bool full_run, const fs::path& out,
                const std::vector<std::string>& argv) {
  std::vector<gpcm::SimCondition> conditions;
  if (full_run) {
    for (const char* dist : {"normal", "uniform", "skewed"})
      for (int ss : {500, 1000, 2000})
        for (int tl : {5, 10, 20}) {
          gpcm::SimCondition c;
          c.distribution = (std::string(dist) == "skewed")
                               ? gpcm::LatentDistribution::make_skewed(
                                     s.skewness, s.excess_kurtosis)
                               : gpcm::LatentDistribution::from_name(dist);
          c.sample_size = ss;
          c.test_length = tl;
          c.n_replications = s.condition.n_replications;
          c.base_seed = s.seed;
          conditions.push_back(c);
        }
  } else {
    gpcm::SimCondition c = s.condition;
    c.base_seed = s.seed;
    conditions.push_back(c);
  }

  gpcm::RunConditionOptions opts;
  opts.estimators.mmle = (method == "mmle" || method == "both");
  opts.estimators.mcmc = (method == "mcmc" || method == "both");
  opts.em = s.em;
  opts.prior = s.prior;
  opts.hmc = s.hmc;
  opts.threads = s.threads;

  std::vector<std::string> outputs;
  std::vector<gpcm::RecoveryReport> reports;
  std::ofstream conv(out / "convergence.csv");
  if (!conv)
    throw cli_error("file_error", "cannot write convergence.csv", kExitData);
  conv << "condition_id,replication,estimator,status,mcmc_retries\n";

  for (auto& cond : conditions) {
    cond.validate();
    gpcm::RecoveryReport report = gpcm::run_condition(cond, opts);
    std::string records_name = "records_" + cond.id() + ".csv";
    gpcm::write_tidy_csv(out / records_name, report);
    outputs.push_back(records_name);

    std::map<std::string, std::set<int>> bad;
    for (const auto& [est, reps] : report.nonconverged)
      bad[est] = std::set<int>(reps.begin(), reps.end());
    for (int rep = 1; rep <= cond.n_replications; ++rep) {
      if (opts.estimators.mmle)
        conv << cond.id() << "," << rep << ",mmle,"
             << (bad["mmle"].count(rep) ? "failed" : "ok") << ",\n";
      if (opts.estimators.mcmc)
        conv << cond.id() << "," << rep << ",mcmc,"
             << (bad["mcmc"].count(rep) ? "failed" : "ok") << ","
             << report.mcmc_retries[rep - 1] << "\n";
    }

    int n_bad = 0;
    for (const auto& [est, reps] : report.nonconverged)
      n_bad += static_cast<int>(reps.size());
    std::cout << cond.id() << ": " << cond.n_replications
              << " replications done";
    if (n_bad > 0) std::cout << ", " << n_bad << " nonconvergent (excluded)";
    std::cout << "\n";
    reports.push_back(std::move(report));
  }
  conv.close();
  outputs.push_back("convergence.csv");

  gpcm::write_summary_csv(out / "summary.csv", reports);
  outputs.push_back("summary.csv");

  json extra = {{"seeds", {{"base", s.seed}}},
                {"conditions", json::array()}};
  for (const auto& rep : reports)
    extra["conditions"].push_back(rep.condition.id());
  write_manifest(out, "recover", argv, settings_to_json(s), extra, outputs);
  return 0;
}

// ------------------------------------------------------------- compare ----

int cmd_compare(const std::string& items_a, const std::string& abilities_a,
                const std::string& items_b, const std::string& abilities_b,
                const RunSettings& s, const fs::path& out,
                const std::vector<std::string>& argv) {
  for (const auto& p : {items_a, abilities_a, items_b, abilities_b})
    require_file(p);
  gpcm::FitResult fa{gpcm::parse_item_csv(items_a),
                     gpcm::parse_ability_csv(abilities_a)};
  gpcm::FitResult fb{gpcm::parse_item_csv(items_b),
                     gpcm::parse_ability_csv(abilities_b)};
  gpcm::CompareReport cmp = gpcm::compare_estimates(fa, fb);
  gpcm::write_compare_csv(out / "compare.csv", cmp);

  json extra = {{"inputs",
                 {{"items_a", items_a},
                  {"abilities_a", abilities_a},
                  {"items_b", items_b},
                  {"abilities_b", abilities_b}}},
                {"ability_correlation", cmp.ability_correlation},
                {"ability_mean_diff", cmp.ability_mean_diff},
                {"ability_max_abs_diff", cmp.ability_max_abs_diff}};
  write_manifest(out, "compare", argv, settings_to_json(s), extra,
                 {"compare.csv"});
  std::cout << "compare: ability correlation " << cmp.ability_correlation
            << ", mean diff " << cmp.ability_mean_diff << "\n";
  return 0;
}

// -------------------------------------------------------------- report ----

int cmd_report(const std::vector<std::string>& record_files,
               const RunSettings& s, const fs::path& out,
               const std::vector<std::string>& argv) {
  std::vector<gpcm::RecoveryReport> reports;
  for (const auto& f : record_files) {
    require_file(f);
    std::vector<gpcm::RecoveryReport> parsed =
        gpcm::parse_tidy_csv(fs::path(f));
    for (auto& rep : parsed) reports.push_back(std::move(rep));
  }
  if (reports.empty())
    throw cli_error("usage_error", "no records to summarize", kExitUsage);
  gpcm::write_summary_csv(out / "summary.csv", reports);

  json extra = {{"inputs", record_files}, {"n_conditions", reports.size()}};
  write_manifest(out, "report", argv, settings_to_json(s), extra,
                 {"summary.csv"});
  std::cout << "report: " << reports.size() << " condition(s) summarized -> "
            << (out / "summary.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> argv_copy(argv, argv + argc);

  CLI::App app{"Partial credit model estimation and recovery toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GPCMFIT_VERSION));

  RunSettings settings;
  std::string dist_name = "normal";
  std::string config_path, condition_flag, out_dir;
  std::string method = "both";
  std::string data_path;
  int replication = 1;
  bool dump_draws = false;
  bool full_run = false;
  std::string items_a, abilities_a, items_b, abilities_b;
  std::vector<std::string> record_files;

  auto add_common = [&](CLI::App* cmd, bool with_condition) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", settings.seed, "base seed");
    cmd->add_option("--out", out_dir, "output directory")->required();
    if (with_condition)
      cmd->add_option("--condition", condition_flag,
                      "distribution,sample_size,test_length");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "Generate one dataset from the built-in item bank");
  add_common(sim, true);
  sim->add_option("--replication", replication,
                  "replication index for the response seed (default 1)");

  CLI::App* fit = app.add_subcommand(
      "fit", "Fit item and ability parameters to a response CSV");
  add_common(fit, false);
  fit->add_option("--data", data_path, "response CSV")->required();
  fit->add_option("--method", method, "mmle | mcmc | both")
      ->check(CLI::IsMember({"mmle", "mcmc", "both"}));
  fit->add_flag("--draws", dump_draws, "also write every retained draw");

  CLI::App* rec = app.add_subcommand(
      "recover", "Monte Carlo parameter recovery over replications");
  add_common(rec, true);
  rec->add_option("--replications", settings.condition.n_replications,
                  "replications per condition");
  rec->add_option("--method", method, "mmle | mcmc | both")
      ->check(CLI::IsMember({"mmle", "mcmc", "both"}));
  rec->add_option("--threads", settings.threads, "worker threads");
  rec->add_flag("--full-design", full_run,
                "all 27 distribution x size x length conditions");

  CLI::App* cmp = app.add_subcommand(
      "compare", "Compare two fits of the same data");
  add_common(cmp, false);
  cmp->add_option("--items-a", items_a, "first item CSV")->required();
  cmp->add_option("--abilities-a", abilities_a, "first ability CSV")
      ->required();
  cmp->add_option("--items-b", items_b, "second item CSV")->required();
  cmp->add_option("--abilities-b", abilities_b, "second ability CSV")
      ->required();

  CLI::App* rep = app.add_subcommand(
      "report", "Rebuild summary tables from tidy record CSVs");
  add_common(rep, false);
  rep->add_option("--records", record_files, "tidy record CSV(s)")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage_error", e.what(), kExitUsage);
    return kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      // Flags given on the command line win over the config file, so
      // snapshot what the parser set before the config overwrites it.
      CLI::App* active = app.get_subcommands().front();
      auto given = [&](const char* name) {
        return active->get_option_no_throw(name) != nullptr &&
               active->count(name) > 0;
      };
      const uint64_t flag_seed = settings.seed;
      const int flag_threads = settings.threads;
      const int flag_reps = settings.condition.n_replications;
      const bool seed_given = given("--seed");
      const bool threads_given = given("--threads");
      const bool reps_given = given("--replications");

      require_file(config_path);
      apply_config_file(fs::path(config_path), settings, &dist_name);

      if (seed_given) settings.seed = flag_seed;
      if (threads_given) settings.threads = flag_threads;
      if (reps_given) settings.condition.n_replications = flag_reps;
    }
    if (!condition_flag.empty())
      apply_condition_flag(condition_flag, settings, &dist_name);
    finalize_settings(settings, dist_name);
    fs::path out = prepare_out_dir(out_dir);

    if (sim->parsed())
      return cmd_simulate(settings, replication, out, argv_copy);
    if (fit->parsed())
      return cmd_fit(settings, data_path, method, dump_draws, out, argv_copy);
    if (rec->parsed())
      return cmd_recover(settings, method, full_run, out, argv_copy);
    if (cmp->parsed())
      return cmd_compare(items_a, abilities_a, items_b, abilities_b, settings,
                         out, argv_copy);
    if (rep->parsed()) return cmd_report(record_files, settings, out, argv_copy);
    emit_error("usage_error", "no subcommand given", kExitUsage);
    return kExitUsage;
  } catch (const cli_error& e) {
    emit_error(e.type, e.what(), e.code);
    return e.code;
  } catch (const gpcm::parse_error& e) {
    emit_error("parse_error", e.what(), kExitData);
    return kExitData;
  } catch (const gpcm::degenerate_item_error& e) {
    emit_error("degenerate_item", e.what(), kExitData);
    return kExitData;
  } catch (const gpcm::nonconvergence_error& e) {
    emit_error("nonconvergence", e.what(), kExitNonconvergence);
    return kExitNonconvergence;
  } catch (const gpcm::stuck_chain_error& e) {
    emit_error("stuck_chain", e.what(), kExitNonconvergence);
    return kExitNonconvergence;
  } catch (const gpcm::numerical_error& e) {
    emit_error("numerical_error", e.what(), kExitNonconvergence);
    return kExitNonconvergence;
  } catch (const gpcm::infeasible_target_error& e) {
    emit_error("infeasible_target", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const gpcm::invalid_input_error& e) {
    emit_error("invalid_input", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const std::exception& e) {
    emit_error("internal_error", e.what(), 1);
    return 1;
  }
}
