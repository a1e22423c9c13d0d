#pragma once

namespace gpcm {

// Coefficients of Y = a + b*X + c*X^2 + d*X^3, X ~ N(0,1), with a = -c so
// that E[Y] = 0.
struct FleishmanCoeffs {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  double d = 0.0;

  double transform(double x) const { return a + x * (b + x * (c + x * d)); }
};

// Solves the cubic-transform moment system for target skewness and EXCESS
// kurtosis by damped Newton iteration (residual < 1e-10).  Throws
// infeasible_target_error when the target lies outside the attainable
// region or the iteration diverges.
FleishmanCoeffs fleishman_coeffs(double skewness, double excess_kurtosis);

namespace detail {
// Residuals of the variance/skewness/kurtosis equations at (b, c, d);
// exposed for the moment-validation tests.
void fleishman_residuals(double b, double c, double d, double skewness,
                         double excess_kurtosis, double out[3]);
}  // namespace detail

}  // namespace gpcm
