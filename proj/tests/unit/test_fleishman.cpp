#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gpcm/errors.hpp"
#include "gpcm/fleishman.hpp"
#include "support/testutil.hpp"

using namespace gpcm;

TEST_CASE("normal target gives the identity transform") {
  auto c = fleishman_coeffs(0.0, 0.0);
  CHECK(std::abs(c.a) < 1e-12);
  CHECK(std::abs(c.b - 1.0) < 1e-12);
  CHECK(std::abs(c.c) < 1e-12);
  CHECK(std::abs(c.d) < 1e-12);
}

TEST_CASE("skew 1.25, excess kurtosis 1.5 matches the frozen reference") {
  /* Frozen output of tests/oracle/fleishman_reference.py (scipy fsolve on
   * the moment system, residuals < 1e-13). */
  auto c = fleishman_coeffs(1.25, 1.5);
  CHECK(std::abs(c.a - -2.8227102596774223e-01) < 1e-7);
  CHECK(std::abs(c.b - 1.0373239712255429e+00) < 1e-7);
  CHECK(std::abs(c.c - 2.8227102596774223e-01) < 1e-7);
  CHECK(std::abs(c.d - -4.2090526338120521e-02) < 1e-7);
  CHECK(c.a == -c.c);

  double r[3];
  detail::fleishman_residuals(c.b, c.c, c.d, 1.25, 1.5, r);
  CHECK(std::abs(r[0]) < 1e-10);
  CHECK(std::abs(r[1]) < 1e-10);
  CHECK(std::abs(r[2]) < 1e-10);
}

TEST_CASE("transformed normals hit the target moments") {
  auto c = fleishman_coeffs(1.25, 1.5);
  std::mt19937_64 rng(424242);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = 10'000'000;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = c.transform(nd(rng));
  CHECK(std::abs(testutil::mean(y)) < 0.005);
  double s = testutil::sd(y);
  CHECK(std::abs(s * s - 1.0) < 0.005);
  CHECK(std::abs(testutil::skewness(y) - 1.25) < 0.02);
  CHECK(std::abs(testutil::excess_kurtosis(y) - 1.5) < 0.05);
}

TEST_CASE("mirrored skew flips the odd coefficients") {
  auto cp = fleishman_coeffs(1.25, 1.5);
  auto cn = fleishman_coeffs(-1.25, 1.5);
  CHECK(std::abs(cn.a + cp.a) < 1e-10);
  CHECK(std::abs(cn.b - cp.b) < 1e-10);
  CHECK(std::abs(cn.c + cp.c) < 1e-10);
  CHECK(std::abs(cn.d - cp.d) < 1e-10);
}

TEST_CASE("unattainable moment targets are rejected") {
  // Below the boundary kurtosis for the requested skewness.
  CHECK_THROWS_AS(fleishman_coeffs(2.0, 0.5), infeasible_target_error);
  // Passes the precheck but the iteration cannot close the system.
  CHECK_THROWS_AS(fleishman_coeffs(0.0, -1.9), infeasible_target_error);
}
