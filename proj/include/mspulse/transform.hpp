#pragma once

#include <cmath>
#include <string>

#include "mspulse/constants.hpp"
#include "mspulse/errors.hpp"
#include "mspulse/spline.hpp"

namespace mspulse {

// Bessel wrappers with parity handling (std::cyl_bessel_j wants x >= 0).
inline double bessel_j0(double x) { return std::cyl_bessel_j(0.0, std::abs(x)); }
inline double bessel_j1(double x) {
  const double v = std::cyl_bessel_j(1.0, std::abs(x));
  return x < 0 ? -v : v;
}
inline double bessel_j2(double x) { return std::cyl_bessel_j(2.0, std::abs(x)); }

/**
 * Location and value of the maximum of the effective-amplitude map:
 * S(Omega)/mu = J1(2 Omega/mu) peaks at argument x_star with value c_max,
 * so S is invertible on [0, c_max * mu) with branch [0, omega_star(mu)].
 */
struct TransformPeak {
  double x_star; // argmax of J1
  double c_max;  // max of J1 = max_Omega S(Omega)/mu
  double omega_star(double mu) const { return 0.5 * x_star * mu; }
};

// Golden-section maximization of J1; computed once per process.
inline const TransformPeak& transform_peak() {
  static const TransformPeak peak = [] {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 1.0, b = 3.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = bessel_j1(x1), f2 = bessel_j1(x2);
    while (b - a > 1e-13) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = bessel_j1(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = bessel_j1(x1);
      }
    }
    const double x = 0.5 * (a + b);
    return TransformPeak{x, bessel_j1(x)};
  }();
  return peak;
}

/// Effective amplitude seen by the spin-dependent force under a fast carrier:
/// S(Omega) = Omega (J0 + J2)(2 Omega/mu) = mu J1(2 Omega/mu). Odd in Omega.
inline double carrier_transform(double omega, double mu) {
  return mu * bessel_j1(2.0 * omega / mu);
}

/// d S / d Omega = (J0 - J2)(2 Omega / mu).
inline double carrier_transform_derivative(double omega, double mu) {
  const double x = 2.0 * omega / mu;
  return bessel_j0(x) - bessel_j2(x);
}

/**
 * Inverse of S on the monotone branch [0, omega_star], odd-extended to
 * negative arguments. Safeguarded Newton with bisection fallback; converges
 * to |S(y) - x| <= tol_rel * mu. Caller must ensure |x| <= c_max * mu.
 */
inline double inverse_transform_value(double x, double mu, double tol_rel = 1e-12) {
  if (x == 0.0) return 0.0;
  const double sign = x < 0 ? -1.0 : 1.0;
  const double target = std::abs(x);
  const TransformPeak& pk = transform_peak();
  if (target > pk.c_max * mu * (1.0 + 1e-12))
    throw DomainError("inverse transform argument exceeds C*mu");

  double lo = 0.0, hi = pk.omega_star(mu);
  double y = std::min(target, hi); // S(y) ~ y for small arguments
  const double tol = tol_rel * mu;
  for (int it = 0; it < 200; ++it) {
    const double f = carrier_transform(y, mu) - target;
    if (std::abs(f) <= tol) return sign * y;
    if (f > 0)
      hi = y;
    else
      lo = y;
    const double df = carrier_transform_derivative(y, mu);
    double ynew = (df != 0.0) ? y - f / df : 0.5 * (lo + hi);
    if (!(ynew > lo && ynew < hi)) ynew = 0.5 * (lo + hi);
    y = ynew;
  }
  // flat-derivative corner near the peak: bisection has converged in y even
  // when S(y) sits within roundoff of the maximum
  return sign * y;
}

struct InverseTransformResult {
  Pulse pulse;
  double max_ratio;   // max |Omega_lin| / (C mu)
  double worst_time;  // where the ratio peaks
};

/**
 * Pointwise S^-1 applied to a dense uniform sampling of the input pulse.
 * Throws AllowedAreaError when any sample exceeds C*mu. The output is a
 * sample-backed Pulse (kind = transformed); S^-1 of a cubic is not a cubic,
 * so the dense sampling is the representation consumed downstream.
 */
inline InverseTransformResult inverse_transform(const Pulse& lin, double mu,
                                                int samples_per_period = 40) {
  const TransformPeak& pk = transform_peak();
  const double span = lin.tf() - lin.t0();
  const double period = 2.0 * constants::pi / mu;
  const int n = std::max(256, (int)std::ceil(span / period * samples_per_period)) + 1;

  Eigen::VectorXd x(n);
  double max_ratio = 0.0, worst_time = lin.t0();
  for (int i = 0; i < n; ++i) {
    const double t = lin.t0() + span * i / (n - 1);
    x[i] = lin(t);
    const double ratio = std::abs(x[i]) / (pk.c_max * mu);
    if (ratio > max_ratio) {
      max_ratio = ratio;
      worst_time = t;
    }
  }
  if (max_ratio > 1.0 + 1e-12)
    throw AllowedAreaError(
        "pulse outside allowed area: |Omega_lin| reaches " +
            std::to_string(max_ratio) + " * C*mu at t = " + std::to_string(worst_time),
        worst_time, max_ratio);

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i)
    y[i] = inverse_transform_value(std::clamp(x[i], -pk.c_max * mu, pk.c_max * mu), mu);
  return {Pulse::from_samples(lin.t0(), lin.tf(), std::move(y), PulseKind::transformed),
          max_ratio, worst_time};
}

} // namespace mspulse
