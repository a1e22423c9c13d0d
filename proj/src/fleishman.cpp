#include "gpcm/fleishman.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "gpcm/errors.hpp"

namespace gpcm {

namespace detail {

void fleishman_residuals(double b, double c, double d, double skewness,
                         double excess_kurtosis, double out[3]) {
  out[0] = b * b + 6.0 * b * d + 2.0 * c * c + 15.0 * d * d - 1.0;
  out[1] = 2.0 * c * (b * b + 24.0 * b * d + 105.0 * d * d + 2.0) - skewness;
  out[2] = 24.0 * (b * d + c * c * (1.0 + b * b + 28.0 * b * d) +
                   d * d * (12.0 + 48.0 * b * d + 141.0 * c * c +
                            225.0 * d * d)) -
           excess_kurtosis;
}

}  // namespace detail

FleishmanCoeffs fleishman_coeffs(double skewness, double excess_kurtosis) {
  if (!std::isfinite(skewness) || !std::isfinite(excess_kurtosis))
    throw invalid_input_error("target moments must be finite");
  // No distribution at all satisfies kurtosis < skewness^2 - 2.
  if (excess_kurtosis < skewness * skewness - 2.0)
    throw infeasible_target_error(
        "no distribution has this skewness/kurtosis combination");

  Eigen::Vector3d x(1.0, 0.1 * skewness, 0.0);
  auto resid = [&](const Eigen::Vector3d& v) {
    double r[3];
    detail::fleishman_residuals(v(0), v(1), v(2), skewness, excess_kurtosis, r);
    return Eigen::Vector3d(r[0], r[1], r[2]);
  };

  Eigen::Vector3d f = resid(x);
  for (int iter = 0; iter < 200; ++iter) {
    if (f.cwiseAbs().maxCoeff() < 1e-10) {
      FleishmanCoeffs out;
      out.b = x(0);
      out.c = x(1);
      out.d = x(2);
      out.a = -out.c;
      return out;
    }
    const double b = x(0), c = x(1), d = x(2);
    Eigen::Matrix3d jac;
    jac(0, 0) = 2.0 * b + 6.0 * d;
    jac(0, 1) = 4.0 * c;
    jac(0, 2) = 6.0 * b + 30.0 * d;
    jac(1, 0) = 2.0 * c * (2.0 * b + 24.0 * d);
    jac(1, 1) = 2.0 * (b * b + 24.0 * b * d + 105.0 * d * d + 2.0);
    jac(1, 2) = 2.0 * c * (24.0 * b + 210.0 * d);
    jac(2, 0) = 24.0 * (d + c * c * (2.0 * b + 28.0 * d) + 48.0 * d * d * d);
    jac(2, 1) = 48.0 * c * (1.0 + b * b + 28.0 * b * d + 141.0 * d * d);
    jac(2, 2) = 24.0 * (b + 28.0 * b * c * c + 24.0 * d + 144.0 * b * d * d +
                        282.0 * c * c * d + 900.0 * d * d * d);

    Eigen::Vector3d step = jac.fullPivLu().solve(-f);
    if (!step.allFinite())
      throw infeasible_target_error(
          "cubic-transform solver hit a singular Jacobian");

    double alpha = 1.0;
    bool moved = false;
    double fnorm = f.norm();
    while (alpha >= 1e-12) {
      Eigen::Vector3d xn = x + alpha * step;
      Eigen::Vector3d fn = resid(xn);
      if (fn.allFinite() && fn.norm() < fnorm) {
        x = xn;
        f = fn;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved)
      throw infeasible_target_error(
          "cubic-transform solver stalled; target moments look unattainable");
  }
  throw infeasible_target_error(
      "cubic-transform solver did not converge in 200 iterations");
}

}  // namespace gpcm
