#include "gpcm/em.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gpcm/errors.hpp"
#include "gpcm/model.hpp"

namespace gpcm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/* Log values are snapped to the 2^-40 grid.  Sums of such values stay
 * exactly representable (magnitudes here are far below 2^12), so the
 * person-node log-likelihood is independent of item summation order and
 * row/column permutations of the data permute the fit bit-exactly. */
double snap(double x) {
  if (!std::isfinite(x)) return x;
  return std::round(x * 0x1p40) * 0x1p-40;
}

// Per-item log-probability tables, category-major so the person loop can
// stream over nodes: tab[k][q] = log P(category k | node q).
std::vector<std::vector<double>> log_prob_tables(const ItemBank& bank,
                                                 const QuadratureGrid& grid,
                                                 int item) {
  const ItemParams& it = bank.items[item];
  const int m = it.n_categories();
  const int nq = grid.n_nodes();
  std::vector<std::vector<double>> tab(m, std::vector<double>(nq));
  std::vector<double> logits(m), probs(m);
  for (int q = 0; q < nq; ++q) {
    detail::gpcm_logits_probs(grid.nodes[q], it.discrimination, it.steps,
                              logits, probs);
    for (int k = 0; k < m; ++k) tab[k][q] = snap(std::log(probs[k]));
  }
  return tab;
}

struct NodeMoments {
  double f = 0.0;                  // sum_k r_k log p_k at this node
  double n = 0.0;                  // total expected count at this node
  double rt = 0.0;                 // sum_k r_k t_k
  double tbar = 0.0, tsq = 0.0;    // E_p[t], E_p[t^2]
  std::vector<double> rtail;       // rtail[s] = sum_{k >= s+1} r_k
  std::vector<double> ptail;       // ptail[s] = sum_{k >= s+1} p_k
  std::vector<double> pttail;      // pttail[s] = sum_{k >= s+1} p_k t_k
};

// Expected complete-data log-likelihood for one item plus its exact
// gradient and Hessian in (log a, d_2..d_m).  Returns -inf when any
// intermediate overflows, which the step-halving loop treats as a
// rejected step.
double item_objective(const std::vector<double>& counts,
                      const QuadratureGrid& grid, double log_a,
                      std::span<const double> steps, Eigen::VectorXd* grad,
                      Eigen::MatrixXd* hess) {
  const int m = static_cast<int>(steps.size()) + 1;
  const int d = m;  // log a plus m-1 steps
  const int nq = grid.n_nodes();
  const double a = std::exp(log_a);
  if (!std::isfinite(a)) return kNegInf;

  if (grad) grad->setZero(d);
  if (hess) hess->setZero(d, d);

  std::vector<double> logits(m), probs(m);
  NodeMoments mo;
  mo.rtail.assign(m - 1, 0.0);
  mo.ptail.assign(m - 1, 0.0);
  mo.pttail.assign(m - 1, 0.0);

  double f = 0.0;
  Eigen::VectorXd vbar(d);
  for (int q = 0; q < nq; ++q) {
    detail::gpcm_logits_probs(grid.nodes[q], a, steps, logits, probs);

    const double* r = counts.data() + static_cast<size_t>(q) * m;
    mo.n = 0.0;
    mo.f = 0.0;
    mo.rt = 0.0;
    mo.tbar = 0.0;
    mo.tsq = 0.0;
    for (int k = 0; k < m; ++k) {
      mo.n += r[k];
      if (r[k] > 0.0) mo.f += r[k] * std::log(probs[k]);
      mo.rt += r[k] * logits[k];
      mo.tbar += probs[k] * logits[k];
      mo.tsq += probs[k] * logits[k] * logits[k];
    }
    f += mo.f;
    if (mo.n == 0.0) continue;
    if (!grad && !hess) continue;

    // Tail sums over categories k >= s+1; step s drives exactly those.
    double racc = 0.0, pacc = 0.0, ptacc = 0.0;
    for (int s = m - 2; s >= 0; --s) {
      racc += r[s + 1];
      pacc += probs[s + 1];
      ptacc += probs[s + 1] * logits[s + 1];
      mo.rtail[s] = racc;
      mo.ptail[s] = pacc;
      mo.pttail[s] = ptacc;
    }

    if (grad) {
      (*grad)(0) += mo.rt - mo.n * mo.tbar;
      for (int s = 0; s < m - 1; ++s)
        (*grad)(1 + s) += -a * (mo.rtail[s] - mo.n * mo.ptail[s]);
    }
    if (hess) {
      // Curvature of the logits themselves (t is linear in the steps but
      // not in log a):
      (*hess)(0, 0) += mo.rt - mo.n * mo.tbar;
      for (int s = 0; s < m - 1; ++s) {
        double cross = -a * (mo.rtail[s] - mo.n * mo.ptail[s]);
        (*hess)(0, 1 + s) += cross;
        (*hess)(1 + s, 0) += cross;
      }
      // Minus n times the covariance of the logit gradient under p.
      vbar(0) = mo.tbar;
      for (int s = 0; s < m - 1; ++s) vbar(1 + s) = -a * mo.ptail[s];
      (*hess)(0, 0) -= mo.n * (mo.tsq - vbar(0) * vbar(0));
      for (int s = 0; s < m - 1; ++s) {
        double cov0s = -a * mo.pttail[s] - vbar(0) * vbar(1 + s);
        (*hess)(0, 1 + s) -= mo.n * cov0s;
        (*hess)(1 + s, 0) -= mo.n * cov0s;
        for (int s2 = 0; s2 < m - 1; ++s2) {
          double ee = a * a * mo.ptail[std::max(s, s2)];
          (*hess)(1 + s, 1 + s2) -= mo.n * (ee - vbar(1 + s) * vbar(1 + s2));
        }
      }
    }
  }
  return std::isfinite(f) ? f : kNegInf;
}

Eigen::VectorXd solve_ascent_direction(const Eigen::MatrixXd& hess,
                                       const Eigen::VectorXd& grad) {
  const int d = grad.size();
  Eigen::MatrixXd neg = -hess;
  double scale = 1.0 + neg.diagonal().cwiseAbs().maxCoeff();
  double ridge = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd reg = neg + ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd step = ldlt.solve(grad);
      if (step.allFinite() && grad.dot(step) > 0.0) return step;
    }
    ridge = (ridge == 0.0) ? 1e-8 * scale : ridge * 100.0;
  }
  throw numerical_error(
      "item update Hessian stayed singular after ridge regularization");
}

std::vector<int> observed_counts(const ResponseMatrix& data, int item, int m) {
  std::vector<int> counts(m, 0);
  for (int i = 0; i < data.n_persons; ++i) ++counts[data(i, item)];
  return counts;
}

}  // namespace

EmConfig::EmConfig() : grid(normal_grid()) {}

void EmConfig::validate() const {
  grid.validate();
  if (max_cycles < 1) throw invalid_input_error("max_cycles must be >= 1");
  if (!(outer_tol > 0.0)) throw invalid_input_error("outer_tol must be > 0");
  if (newton_max_iter < 1)
    throw invalid_input_error("newton_max_iter must be >= 1");
  if (!(newton_tol > 0.0)) throw invalid_input_error("newton_tol must be > 0");
}

EStepResult e_step(const ResponseMatrix& data, const ItemBank& bank,
                   const QuadratureGrid& grid) {
  grid.validate();
  if (data.n_items != bank.n_items())
    throw invalid_input_error("data and bank disagree on the number of items");
  for (const auto& it : bank.items) it.validate();
  std::vector<int> m_per_item = categories_per_item(bank);
  data.validate(m_per_item);

  const int n = data.n_persons;
  const int nj = data.n_items;
  const int nq = grid.n_nodes();

  EStepResult res;
  res.n_persons = n;
  res.n_nodes = nq;
  res.posterior.assign(static_cast<size_t>(n) * nq, 0.0);
  res.expected_counts.resize(nj);

  std::vector<std::vector<std::vector<double>>> tabs(nj);
  for (int j = 0; j < nj; ++j) tabs[j] = log_prob_tables(bank, grid, j);

  std::vector<double> logw(nq);
  for (int q = 0; q < nq; ++q) logw[q] = snap(std::log(grid.weights[q]));

  /* Counts accumulate as scaled integers so the totals do not depend on
   * person order.  The 2^-40 quantization is orders of magnitude below
   * the EM tolerance. */
  std::vector<std::vector<std::int64_t>> cnt(nj);
  for (int j = 0; j < nj; ++j)
    cnt[j].assign(static_cast<size_t>(m_per_item[j]) * nq, 0);

  std::vector<double> acc(nq);
  for (int i = 0; i < n; ++i) {
    std::copy(logw.begin(), logw.end(), acc.begin());
    auto row = data.row(i);
    for (int j = 0; j < nj; ++j) {
      const double* lp = tabs[j][row[j]].data();
      for (int q = 0; q < nq; ++q) acc[q] += lp[q];
    }
    double mx = *std::max_element(acc.begin(), acc.end());
    if (!std::isfinite(mx))
      throw numerical_error("person likelihood vanished on every node");
    double sum = 0.0;
    double* w = res.posterior.data() + static_cast<size_t>(i) * nq;
    for (int q = 0; q < nq; ++q) {
      w[q] = std::exp(acc[q] - mx);
      sum += w[q];
    }
    res.marginal_loglik += mx + std::log(sum);
    double inv = 1.0 / sum;
    for (int q = 0; q < nq; ++q) w[q] *= inv;
    for (int j = 0; j < nj; ++j) {
      std::int64_t* c = cnt[j].data() + static_cast<size_t>(row[j]) * nq;
      for (int q = 0; q < nq; ++q) c[q] += std::llround(w[q] * 0x1p40);
    }
  }

  for (int j = 0; j < nj; ++j) {
    const int m = m_per_item[j];
    res.expected_counts[j].assign(static_cast<size_t>(nq) * m, 0.0);
    for (int k = 0; k < m; ++k)
      for (int q = 0; q < nq; ++q)
        res.expected_counts[j][static_cast<size_t>(q) * m + k] =
            static_cast<double>(cnt[j][static_cast<size_t>(k) * nq + q]) *
            0x1p-40;
  }
  return res;
}

ItemParams m_step_item(const std::vector<double>& expected_counts,
                       const QuadratureGrid& grid, const ItemParams& start,
                       const EmConfig& cfg) {
  grid.validate();
  start.validate();
  const int m = start.n_categories();
  const int nq = grid.n_nodes();
  if (expected_counts.size() != static_cast<size_t>(nq) * m)
    throw invalid_input_error("expected counts have the wrong shape");
  for (double r : expected_counts)
    if (!(r >= 0.0))
      throw invalid_input_error("expected counts must be nonnegative");

  const int d = m;
  Eigen::VectorXd x(d);
  x(0) = std::log(start.discrimination);
  for (int s = 0; s < m - 1; ++s) x(1 + s) = start.steps[s];

  Eigen::VectorXd grad(d);
  Eigen::MatrixXd hess(d, d);
  auto steps_of = [&](const Eigen::VectorXd& v) {
    return std::span<const double>(v.data() + 1, static_cast<size_t>(m - 1));
  };

  double f = item_objective(expected_counts, grid, x(0), steps_of(x), &grad,
                            &hess);
  for (int iter = 0; iter < cfg.newton_max_iter; ++iter) {
    if (grad.cwiseAbs().maxCoeff() <= cfg.newton_tol) break;
    Eigen::VectorXd dir = solve_ascent_direction(hess, grad);
    double alpha = 1.0;
    bool moved = false;
    while (alpha >= 1e-10) {
      Eigen::VectorXd xn = x + alpha * dir;
      double fn = item_objective(expected_counts, grid, xn(0), steps_of(xn),
                                 nullptr, nullptr);
      if (fn >= f - 1e-12) {
        x = xn;
        f = item_objective(expected_counts, grid, x(0), steps_of(x), &grad,
                           &hess);
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // no ascent possible at machine precision
  }

  ItemParams out;
  out.discrimination = std::exp(x(0));
  out.steps.assign(x.data() + 1, x.data() + d);
  out.validate();
  return out;
}

ResponseMatrix MmleFit::map_responses(const ResponseMatrix& data) const {
  if (static_cast<int>(category_maps.size()) != data.n_items)
    throw invalid_input_error("category maps do not match the data");
  ResponseMatrix out(data.n_persons, data.n_items);
  for (int i = 0; i < data.n_persons; ++i)
    for (int j = 0; j < data.n_items; ++j) {
      int u = data(i, j);
      if (u < 0 || u >= static_cast<int>(category_maps[j].size()))
        throw invalid_input_error("response outside the mapped range");
      out(i, j) = category_maps[j][u];
    }
  return out;
}

MmleFit fit_mmle(const ResponseMatrix& data, const std::vector<int>& m_per_item,
                 const EmConfig& cfg) {
  cfg.validate();
  if (data.n_persons < 1)
    throw invalid_input_error("need at least one person to fit");
  if (data.n_items < 1)
    throw invalid_input_error("need at least one item to fit");
  for (int m : m_per_item)
    if (m < 2) throw invalid_input_error("every item needs >= 2 categories");
  data.validate(m_per_item);

  const int nj = data.n_items;
  MmleFit fit;
  fit.category_maps.resize(nj);

  // Unobserved categories cannot be estimated; merge each into its lower
  // neighbor (or the first observed category when nothing lies below).
  std::vector<int> m_fit(nj);
  for (int j = 0; j < nj; ++j) {
    std::vector<int> counts = observed_counts(data, j, m_per_item[j]);
    int n_seen = 0;
    for (int c : counts) n_seen += (c > 0) ? 1 : 0;
    if (n_seen < 2) throw degenerate_item_error(j + 1);
    auto& map = fit.category_maps[j];
    map.assign(m_per_item[j], 0);
    int next = -1;
    for (int k = 0; k < m_per_item[j]; ++k) {
      if (counts[k] > 0)
        map[k] = ++next;
      else {
        map[k] = std::max(next, 0);
        fit.warnings.push_back("item " + std::to_string(j + 1) + ": category " +
                               std::to_string(k + 1) +
                               " never observed; merged with its neighbor");
      }
    }
    m_fit[j] = n_seen;
  }

  ResponseMatrix mdata = fit.map_responses(data);

  // Start values: unit discrimination, steps from the empirical adjacent
  // log-odds log(q_{k-1}/q_k).
  ItemBank bank;
  bank.items.resize(nj);
  for (int j = 0; j < nj; ++j) {
    std::vector<int> counts = observed_counts(mdata, j, m_fit[j]);
    ItemParams& it = bank.items[j];
    it.discrimination = 1.0;
    it.steps.resize(m_fit[j] - 1);
    for (int s = 0; s < m_fit[j] - 1; ++s)
      it.steps[s] = std::log(static_cast<double>(counts[s]) /
                             static_cast<double>(counts[s + 1]));
  }

  for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    EStepResult es = e_step(mdata, bank, cfg.grid);
    fit.loglik_trace.push_back(es.marginal_loglik);

    double max_change = 0.0;
    for (int j = 0; j < nj; ++j) {
      ItemParams updated =
          m_step_item(es.expected_counts[j], cfg.grid, bank.items[j], cfg);
      max_change = std::max(
          max_change,
          std::abs(updated.discrimination - bank.items[j].discrimination));
      for (int s = 0; s < m_fit[j] - 1; ++s)
        max_change = std::max(
            max_change, std::abs(updated.steps[s] - bank.items[j].steps[s]));
      bank.items[j] = updated;
    }
    fit.n_cycles = cycle;
    if (max_change < cfg.outer_tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fit.warnings.push_back("EM reached max_cycles before the parameter "
                           "change dropped below outer_tol");
  fit.bank_hat = std::move(bank);
  return fit;
}

EapResult eap_abilities(const ResponseMatrix& data, const ItemBank& bank_hat,
                        const QuadratureGrid& grid) {
  EStepResult es = e_step(data, bank_hat, grid);
  EapResult out;
  out.theta.resize(es.n_persons);
  out.sd.resize(es.n_persons);
  for (int i = 0; i < es.n_persons; ++i) {
    double mean = 0.0, sq = 0.0;
    for (int q = 0; q < es.n_nodes; ++q) {
      double w = es.weight(i, q);
      mean += w * grid.nodes[q];
      sq += w * grid.nodes[q] * grid.nodes[q];
    }
    out.theta[i] = mean;
    out.sd[i] = std::sqrt(std::max(0.0, sq - mean * mean));
  }
  return out;
}

}  // namespace gpcm
