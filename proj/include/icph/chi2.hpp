#pragma once

#include <cmath>
#include <limits>

#include "icph/errors.hpp"

namespace icph {

namespace detail {

// Regularized lower incomplete gamma P(a,x), by series expansion.
// Valid (and fast) for x < a + 1.
inline double gamma_p_series(double a, double x) {
  const double lg = std::lgamma(a);
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) {
      return sum * std::exp(-x + a * std::log(x) - lg);
    }
  }
  throw IntegrationFailure("incomplete gamma series failed to converge");
}

// Regularized upper incomplete gamma Q(a,x), by Lentz continued fraction.
// Valid for x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
  const double lg = std::lgamma(a);
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) {
      return h * std::exp(-x + a * std::log(x) - lg);
    }
  }
  throw IntegrationFailure("incomplete gamma continued fraction failed to converge");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a,x) / Gamma(a).
inline double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw DomainError("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

/// Chi-square CDF with dof degrees of freedom.
inline double chi2_cdf(double x, int dof) {
  if (dof < 1) throw DomainError("chi2_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * dof, 0.5 * x);
}

/// Chi-square quantile: smallest x with CDF(x) >= prob.
///
/// Newton iteration on the regularized incomplete gamma, seeded by the
/// Wilson-Hilferty approximation and safeguarded by bisection. Absolute
/// accuracy 1e-8.
inline double chi2_quantile(double prob, int dof) {
  if (dof < 1) throw DomainError("chi2_quantile: dof must be >= 1");
  if (!(prob > 0.0 && prob < 1.0)) {
    throw DomainError("chi2_quantile: prob must lie in (0, 1)");
  }

  // Wilson-Hilferty start.
  const double k = static_cast<double>(dof);
  // Inverse normal CDF via Acklam-style rational approximation is overkill
  // here; a crude start suffices since Newton converges fast and bisection
  // guards it.
  double x = k * std::pow(1.0 - 2.0 / (9.0 * k), 3.0);
  if (!(x > 0.0) || !std::isfinite(x)) x = k;

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, dof) - prob;
    if (f > 0.0) {
      hi = std::min(hi, x);
    } else {
      lo = std::max(lo, x);
    }
    // Chi-square density at x.
    const double logpdf = (0.5 * k - 1.0) * std::log(x) - 0.5 * x -
                          std::lgamma(0.5 * k) - 0.5 * k * std::log(2.0);
    const double pdf = std::exp(logpdf);
    double next = x - f / pdf;
    if (!(next > lo && (next < hi))) {
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(2.0 * x, 1.0);
    }
    if (std::fabs(next - x) <= 1e-10 * std::max(1.0, x) + 1e-12) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

}  // namespace icph
