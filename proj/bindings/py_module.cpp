#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <vector>

#include "gpcm/em.hpp"
#include "gpcm/fleishman.hpp"
#include "gpcm/mcmc.hpp"
#include "gpcm/model.hpp"
#include "gpcm/simulate.hpp"
#include "gpcm/generating_bank.hpp"

namespace py = pybind11;

namespace {

gpcm::ResponseMatrix to_matrix(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw std::invalid_argument("responses are empty");
  const int n = static_cast<int>(rows.size());
  const int nj = static_cast<int>(rows[0].size());
  gpcm::ResponseMatrix data(n, nj);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != nj)
      throw std::invalid_argument("response rows have unequal lengths");
    for (int j = 0; j < nj; ++j) data(i, j) = rows[i][j];
  }
  return data;
}

std::vector<int> infer_categories(const gpcm::ResponseMatrix& data,
                                  const std::optional<std::vector<int>>& m) {
  if (m) return *m;
  std::vector<int> out(data.n_items, 0);
  for (int i = 0; i < data.n_persons; ++i)
    for (int j = 0; j < data.n_items; ++j)
      out[j] = std::max(out[j], data(i, j) + 1);
  return out;
}

py::list bank_to_py(const gpcm::ItemBank& bank) {
  py::list items;
  for (const auto& it : bank.items) {
    py::dict d;
    d["a"] = it.discrimination;
    d["steps"] = it.steps;
    items.append(d);
  }
  return items;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Partial credit model estimation: marginal maximum likelihood "
            "and Hamiltonian Monte Carlo";
  m.attr("__version__") = GPCMFIT_VERSION;

  m.def(
      "category_probs",
      [](double theta, double a, const std::vector<double>& steps) {
        gpcm::ItemParams item;
        item.discrimination = a;
        item.steps = steps;
        return gpcm_category_probs(theta, item);
      },
      py::arg("theta"), py::arg("a"), py::arg("steps"),
      "Category probabilities for one item at one theta");

  m.def("generating_bank",
        []() { return bank_to_py(gpcm::generating_bank()); },
        "The built-in 20-item five-category bank");

  m.def(
      "fleishman_coeffs",
      [](double skewness, double excess_kurtosis) {
        auto c = gpcm::fleishman_coeffs(skewness, excess_kurtosis);
        return py::make_tuple(c.a, c.b, c.c, c.d);
      },
      py::arg("skewness"), py::arg("excess_kurtosis"),
      "Cubic-transform coefficients (a, b, c, d) for the target moments");

  m.def(
      "simulate",
      [](const std::string& distribution, int sample_size, int test_length,
         uint64_t seed, int replication) {
        gpcm::SimCondition cond;
        cond.distribution = gpcm::LatentDistribution::from_name(distribution);
        cond.sample_size = sample_size;
        cond.test_length = test_length;
        cond.base_seed = seed;
        cond.validate();
        gpcm::ItemBank bank = gpcm::generating_bank_prefix(test_length);
        gpcm::ThetaVector thetas =
            gpcm::generate_thetas(cond.distribution, sample_size, seed);
        uint64_t resp_seed = gpcm::derive_seed(
            seed, "responses",
            {static_cast<uint64_t>(cond.distribution.tag),
             static_cast<uint64_t>(sample_size),
             static_cast<uint64_t>(test_length),
             static_cast<uint64_t>(replication)});
        gpcm::ResponseMatrix data =
            gpcm::generate_responses(bank, thetas, resp_seed);
        std::vector<std::vector<int>> rows(data.n_persons);
        for (int i = 0; i < data.n_persons; ++i)
          rows[i].assign(data.row(i).begin(), data.row(i).end());
        py::dict out;
        out["thetas"] = thetas;
        out["responses"] = rows;
        out["items"] = bank_to_py(bank);
        return out;
      },
      py::arg("distribution"), py::arg("sample_size"), py::arg("test_length"),
      py::arg("seed") = 0, py::arg("replication") = 1,
      "Draw thetas and responses from the built-in bank");

  m.def(
      "fit_mmle",
      [](const std::vector<std::vector<int>>& responses,
         const std::optional<std::vector<int>>& m_per_item) {
        gpcm::ResponseMatrix data = to_matrix(responses);
        std::vector<int> m = infer_categories(data, m_per_item);
        gpcm::MmleFit fit = gpcm::fit_mmle(data, m);
        gpcm::EmConfig cfg;
        gpcm::EapResult eap = gpcm::eap_abilities(fit.map_responses(data),
                                                  fit.bank_hat, cfg.grid);
        py::dict out;
        out["items"] = bank_to_py(fit.bank_hat);
        out["theta"] = eap.theta;
        out["theta_sd"] = eap.sd;
        out["converged"] = fit.converged;
        out["cycles"] = fit.n_cycles;
        out["loglik"] = fit.loglik_trace.empty() ? 0.0
                                                 : fit.loglik_trace.back();
        out["warnings"] = fit.warnings;
        return out;
      },
      py::arg("responses"), py::arg("m_per_item") = std::nullopt,
      "Marginal maximum likelihood fit with EAP ability scores");

  m.def(
      "fit_mcmc",
      [](const std::vector<std::vector<int>>& responses,
         const std::optional<std::vector<int>>& m_per_item, uint64_t seed,
         int chains, int iters, int warmup) {
        gpcm::ResponseMatrix data = to_matrix(responses);
        std::vector<int> m = infer_categories(data, m_per_item);
        gpcm::HmcConfig cfg;
        cfg.seed = seed;
        cfg.n_chains = chains;
        cfg.iters_per_chain = iters;
        cfg.warmup = warmup;
        gpcm::McmcFit fit = gpcm::fit_mcmc(data, m, gpcm::PriorSpec(), cfg);
        py::dict out;
        out["items"] = bank_to_py(fit.bank_hat);
        out["theta"] = fit.theta_hat;
        out["mu_b"] = fit.mu_b_hat;
        out["sigma_b"] = fit.sigma_b_hat;
        out["psrf_max"] =
            *std::max_element(fit.psrf.begin(), fit.psrf.end());
        out["retries"] = fit.n_retries;
        out["accept_rate"] = fit.accept_rate;
        return out;
      },
      py::arg("responses"), py::arg("m_per_item") = std::nullopt,
      py::arg("seed") = 0, py::arg("chains") = 3, py::arg("iters") = 600,
      py::arg("warmup") = 300,
      "Bayesian fit by Hamiltonian Monte Carlo with a PSRF retry loop");

  m.def(
      "psrf",
      [](const std::vector<std::vector<double>>& chains) {
        return gpcm::psrf(chains);
      },
      py::arg("chains"),
      "Gelman-Rubin potential scale reduction factor");

  py::register_exception<gpcm::invalid_input_error>(m, "InvalidInputError",
                                                    PyExc_ValueError);
  py::register_exception<gpcm::nonconvergence_error>(m, "NonconvergenceError",
                                                     PyExc_RuntimeError);
}
