#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gpcm/errors.hpp"
#include "gpcm/model.hpp"
#include "gpcm/generating_bank.hpp"
#include "support/testutil.hpp"

using namespace gpcm;
using testutil::item;
using testutil::ref_probs;

namespace {

// First generating-bank item, written out so these checks do not depend on
// the bank accessor they help to validate.
const double kItem1A = 1.476;
const std::vector<double> kItem1Steps = {-1.726, -0.145, -0.849, 1.765};

/* Frozen output of tests/oracle/brute_force_gpcm.py, a one-file evaluator
 * of the category-probability formula written before the library. */
const std::vector<double> kItem1ProbsM2 = {
    5.8191386410144108e-01, 3.8834667654871657e-01, 2.5126383686257539e-02,
    4.5953385773346402e-03, 1.7737086250121242e-05};
const std::vector<double> kItem1Probs0 = {
    1.1222942608329249e-02, 1.4338540292422411e-01, 1.7760396047232022e-01,
    6.2183832435750919e-01, 4.5949369637617192e-02};
const std::vector<double> kItem1ProbsP2 = {
    1.0584754557250895e-06, 2.5889061162184693e-04, 6.1390520718769678e-03,
    4.1149396104949648e-01, 5.8210703779154904e-01};

double item_loglik(double theta, const ItemParams& it, int u) {
  return std::log(gpcm_category_probs(theta, it)[u]);
}

}  // namespace

TEST_CASE("uniform probabilities when all logits vanish") {
  auto p = gpcm_category_probs(0.0, item(1.0, {0.0, 0.0, 0.0, 0.0}));
  REQUIRE(p.size() == 5);
  for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("two categories reduce to a logistic, half at theta == step") {
  auto p = gpcm_category_probs(0.0, item(1.3, {0.0}));
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("first bank item matches the frozen brute-force values") {
  auto it = item(kItem1A, kItem1Steps);
  auto pm2 = gpcm_category_probs(-2.0, it);
  auto p0 = gpcm_category_probs(0.0, it);
  auto pp2 = gpcm_category_probs(2.0, it);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(pm2[k] - kItem1ProbsM2[k]) < 1e-12);
    CHECK(std::abs(p0[k] - kItem1Probs0[k]) < 1e-12);
    CHECK(std::abs(pp2[k] - kItem1ProbsP2[k]) < 1e-12);
  }
  // Cross-check against the in-test long double evaluator as well.
  auto r = ref_probs(0.7, kItem1A, kItem1Steps);
  auto p = gpcm_category_probs(0.7, it);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(p[k] - r[k]) < 1e-13);
}

TEST_CASE("probabilities form a simplex over random draws") {
  std::mt19937 rng(20240811);
  std::uniform_real_distribution<double> uth(-4.0, 4.0);
  std::uniform_real_distribution<double> ua(0.2, 3.0);
  std::uniform_real_distribution<double> ud(-3.0, 3.0);
  std::uniform_int_distribution<int> um(2, 6);
  for (int rep = 0; rep < 10000; ++rep) {
    int m = um(rng);
    std::vector<double> steps(m - 1);
    for (auto& s : steps) s = ud(rng);
    auto p = gpcm_category_probs(uth(rng), item(ua(rng), steps));
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("constrained-slope mapping reproduces the probabilities") {
  SUBCASE("hand-checked coefficients") {
    auto n1 = gpcm_to_nrm(item(1.0, {0.0}));
    CHECK(n1.slopes == std::vector<double>{0.0, 1.0});
    CHECK(n1.intercepts == std::vector<double>{0.0, 0.0});
    auto n2 = gpcm_to_nrm(item(2.0, {1.0}));
    CHECK(n2.slopes == std::vector<double>{0.0, 2.0});
    CHECK(n2.intercepts == std::vector<double>{0.0, -2.0});
  }
  SUBCASE("first bank item at a few thetas") {
    auto it = item(kItem1A, kItem1Steps);
    auto nrm = gpcm_to_nrm(it);
    for (double th : {-2.0, 0.0, 2.0}) {
      auto pg = gpcm_category_probs(th, it);
      auto pn = nrm_category_probs(th, nrm);
      for (int k = 0; k < 5; ++k) CHECK(std::abs(pg[k] - pn[k]) < 1e-12);
    }
  }
  SUBCASE("random items across a theta grid") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ua(0.2, 3.0);
    std::uniform_real_distribution<double> ud(-2.5, 2.5);
    std::uniform_int_distribution<int> um(2, 6);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      int m = um(rng);
      std::vector<double> steps(m - 1);
      for (auto& s : steps) s = ud(rng);
      auto it = item(ua(rng), steps);
      auto nrm = gpcm_to_nrm(it);
      for (double th = -4.0; th <= 4.0; th += 0.5) {
        auto pg = gpcm_category_probs(th, it);
        auto pn = nrm_category_probs(th, nrm);
        for (int k = 0; k < m; ++k)
          worst = std::max(worst, std::abs(pg[k] - pn[k]));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("nominal-model probabilities") {
  NrmParams flat;
  flat.slopes = {0.0, 0.0, 0.0};
  flat.intercepts = {0.0, 0.0, 0.0};
  auto p = nrm_category_probs(1.7, flat);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-14));

  NrmParams two;
  two.slopes = {0.0, 1.0};
  two.intercepts = {0.0, 0.0};
  auto q = nrm_category_probs(0.0, two);
  CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-14));

  // Direct softmax oracle on arbitrary 4-category parameters.
  NrmParams any;
  any.slopes = {0.0, 0.8, -0.4, 1.9};
  any.intercepts = {0.0, 0.3, 1.1, -0.7};
  double th = 0.7;
  std::vector<double> z(4), expz(4);
  double sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    z[k] = any.slopes[k] * th + any.intercepts[k];
    expz[k] = std::exp(z[k]);
    sum += expz[k];
  }
  auto pr = nrm_category_probs(th, any);
  for (int k = 0; k < 4; ++k)
    CHECK(pr[k] == doctest::Approx(expz[k] / sum).epsilon(1e-13));
}

TEST_CASE("translation covariance: shifting theta and steps together") {
  auto it = item(1.9, {-0.6, 0.2, 1.4});
  for (double c : {0.5, -1.25, 2.0}) {
    std::vector<double> shifted = it.steps;
    for (auto& s : shifted) s += c;
    for (double th : {-1.3, 0.0, 0.8}) {
      auto p = gpcm_category_probs(th, it);
      auto q = gpcm_category_probs(th + c, item(1.9, shifted));
      for (size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - q[k]) < 1e-12);
    }
  }
}

TEST_CASE("extreme arguments stay a valid simplex") {
  auto it = item(3.0, kItem1Steps);
  for (double th : {-35.0, 35.0}) {
    auto p = gpcm_category_probs(th, it);
    double sum = 0.0;
    for (double v : p) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK(gpcm_category_probs(-35.0, it)[0] > 0.999);
  CHECK(gpcm_category_probs(35.0, it)[4] > 0.999);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(gpcm_category_probs(std::nan(""), item(1.0, {0.0})),
                  invalid_input_error);
  CHECK_THROWS_AS(gpcm_category_probs(0.0, item(-1.0, {0.0})),
                  invalid_input_error);
  CHECK_THROWS_AS(gpcm_category_probs(0.0, item(1.0, {})),
                  invalid_input_error);
  std::vector<double> out(3);
  CHECK_THROWS_AS(
      gpcm_category_probs(0.0, item(1.0, {0.0}), std::span<double>(out)),
      invalid_input_error);
}

TEST_CASE("in-place variant equals the allocating one") {
  auto it = item(1.476, kItem1Steps);
  auto p = gpcm_category_probs(0.37, it);
  std::vector<double> q(5);
  gpcm_category_probs(0.37, it, q);
  CHECK(p == q);
}

TEST_CASE("joint log-likelihood") {
  SUBCASE("single fifty-fifty response") {
    ItemBank bank;
    bank.items = {item(1.0, {0.0})};
    ResponseMatrix data(1, 1);
    for (int u : {0, 1}) {
      data(0, 0) = u;
      CHECK(gpcm_log_likelihood(data, bank, {0.0}) ==
            doctest::Approx(std::log(0.5)).epsilon(1e-14));
    }
  }
  SUBCASE("additivity over persons and items") {
    ItemBank bank;
    bank.items = {item(1.2, {-0.5, 0.6}), item(0.8, {0.3})};
    ResponseMatrix data(2, 2);
    data(0, 0) = 2;
    data(0, 1) = 0;
    data(1, 0) = 1;
    data(1, 1) = 1;
    ThetaVector th = {-0.4, 1.1};
    double direct = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        direct += std::log(gpcm_category_probs(th[i], bank.items[j])[data(i, j)]);
    CHECK(gpcm_log_likelihood(data, bank, th) ==
          doctest::Approx(direct).epsilon(1e-13));
  }
  SUBCASE("full bank against the long double evaluator") {
    const ItemBank& bank = generating_bank();
    ResponseMatrix data(10, 20);
    ThetaVector th(10);
    for (int i = 0; i < 10; ++i) {
      th[i] = -2.25 + 0.5 * i;
      for (int j = 0; j < 20; ++j) data(i, j) = (i + 2 * j) % 5;
    }
    long double ref = 0.0L;
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 20; ++j) {
        const auto& it = bank.items[j];
        ref += logl(
            ref_probs(th[i], it.discrimination, it.steps)[data(i, j)]);
      }
    CHECK(std::abs(gpcm_log_likelihood(data, bank, th) -
                   static_cast<double>(ref)) < 1e-10);
  }
}

TEST_CASE("item gradient: logistic symmetry at theta == step") {
  double a = 1.7;
  auto it = item(a, {0.3});
  auto g0 = grad_item_loglik(0.3, it, 0);
  auto g1 = grad_item_loglik(0.3, it, 1);
  REQUIRE(g0.size() == 2);
  CHECK(g0[1] == doctest::Approx(0.5 * a).epsilon(1e-12));
  CHECK(g1[1] == doctest::Approx(-0.5 * a).epsilon(1e-12));
}

TEST_CASE("item gradient: probability-weighted score sums to zero") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> uth(-3.0, 3.0);
  std::uniform_real_distribution<double> ua(0.3, 2.5);
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  std::uniform_int_distribution<int> um(2, 5);
  for (int rep = 0; rep < 200; ++rep) {
    int m = um(rng);
    std::vector<double> steps(m - 1);
    for (auto& s : steps) s = ud(rng);
    auto it = item(ua(rng), steps);
    double th = uth(rng);
    auto p = gpcm_category_probs(th, it);
    std::vector<double> acc(m, 0.0);
    for (int u = 0; u < m; ++u) {
      auto g = grad_item_loglik(th, it, u);
      for (int c = 0; c < m; ++c) acc[c] += p[u] * g[c];
    }
    for (double v : acc) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("item gradient matches central finite differences") {
  auto check_fd = [](double theta, const ItemParams& it, int u) {
    const double h = 1e-5;
    auto g = grad_item_loglik(theta, it, u);
    // log a component: evaluate at a*exp(+-h)
    {
      ItemParams up = it, dn = it;
      up.discrimination = it.discrimination * std::exp(h);
      dn.discrimination = it.discrimination * std::exp(-h);
      double fd = (item_loglik(theta, up, u) - item_loglik(theta, dn, u)) /
                  (2.0 * h);
      CHECK(std::abs(g[0] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
    for (size_t s = 0; s < it.steps.size(); ++s) {
      ItemParams up = it, dn = it;
      up.steps[s] += h;
      dn.steps[s] -= h;
      double fd = (item_loglik(theta, up, u) - item_loglik(theta, dn, u)) /
                  (2.0 * h);
      CHECK(std::abs(g[s + 1] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  };

  // The named spot check, then a sweep of random points.
  check_fd(0.5, item(kItem1A, kItem1Steps), 2);

  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> uth(-3.0, 3.0);
  std::uniform_real_distribution<double> ua(0.3, 2.5);
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  std::uniform_int_distribution<int> um(2, 5);
  for (int rep = 0; rep < 1000; ++rep) {
    int m = um(rng);
    std::vector<double> steps(m - 1);
    for (auto& s : steps) s = ud(rng);
    auto it = item(ua(rng), steps);
    check_fd(uth(rng), it,
             static_cast<int>(rng() % static_cast<unsigned>(m)));
  }

  CHECK_THROWS_AS(grad_item_loglik(0.0, item(1.0, {0.0}), 2),
                  invalid_input_error);
}

TEST_CASE("theta gradient") {
  SUBCASE("closed form for zero-step items at theta zero") {
    ItemBank bank;
    bank.items = {item(1.2, {0.0, 0.0, 0.0, 0.0}), item(0.7, {0.0, 0.0})};
    std::vector<int> resp = {4, 0};
    double expect = 1.2 * (4 - 2.0) + 0.7 * (0 - 1.0);
    CHECK(grad_theta_loglik(0.0, bank, resp) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("empty bank gives zero") {
    ItemBank bank;
    std::vector<int> resp;
    CHECK(grad_theta_loglik(0.4, bank, resp) == 0.0);
  }
  SUBCASE("finite differences on a bank prefix") {
    ItemBank bank = generating_bank_prefix(10);
    std::vector<int> resp = {0, 1, 2, 3, 4, 3, 2, 1, 0, 2};
    const double h = 1e-5;
    for (double th : {-1.7, 0.37, 2.2}) {
      double up = 0.0, dn = 0.0;
      for (int j = 0; j < 10; ++j) {
        up += std::log(gpcm_category_probs(th + h, bank.items[j])[resp[j]]);
        dn += std::log(gpcm_category_probs(th - h, bank.items[j])[resp[j]]);
      }
      double fd = (up - dn) / (2.0 * h);
      double an = grad_theta_loglik(th, bank, resp);
      CHECK(std::abs(an - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("generating bank shape and prefix rule") {
  const ItemBank& bank = generating_bank();
  REQUIRE(bank.n_items() == 20);
  for (const auto& it : bank.items) {
    CHECK(it.n_categories() == 5);
    CHECK(it.discrimination > 0.0);
  }
  CHECK(bank.items[0].discrimination == doctest::Approx(1.476));
  CHECK(bank.items[0].steps[0] == doctest::Approx(-1.726));
  ItemBank five = generating_bank_prefix(5);
  CHECK(five.n_items() == 5);
  CHECK(five.items[4].discrimination == bank.items[4].discrimination);
  CHECK_THROWS_AS(generating_bank_prefix(0), invalid_input_error);
  CHECK_THROWS_AS(generating_bank_prefix(21), invalid_input_error);
}
